"""Hand-rolled reference implementations used to cross-check the library.

Deliberately written with plain Python data structures and no scipy so
they share no code path with the implementations under test.
"""

from collections import deque

WALKABLE_TILE_IDS = {0, 1, 2, 5, 6, 7, 8, 11}  # ashes bog bridge fungus grass ground ice sand


def walkable_cells(grid_rows):
    """Set of (r, c) for walkable tiles; accepts any nested int sequence."""
    cells = set()
    for r, row in enumerate(grid_rows):
        for c, value in enumerate(row):
            if int(value) in WALKABLE_TILE_IDS:
                cells.add((r, c))
    return cells


def flood_components(cells):
    """Sizes of 4-connected components of a cell set, largest first."""
    remaining = set(cells)
    sizes = []
    while remaining:
        start = remaining.pop()
        queue = deque([start])
        size = 1
        while queue:
            r, c = queue.popleft()
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if (nr, nc) in remaining:
                    remaining.remove((nr, nc))
                    queue.append((nr, nc))
                    size += 1
        sizes.append(size)
    return sorted(sizes, reverse=True)


def component_count(grid_rows):
    return len(flood_components(walkable_cells(grid_rows)))
