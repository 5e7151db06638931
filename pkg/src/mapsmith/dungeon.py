"""Constructive dungeon generator.

Room-accretion in the classic roguelike style, producing 32x32 terrain
maps that are always fully playable:

1.  start from an all-rock grid and carve a seed room near the center
    (rectangle or cellular-automata cave blob);
2.  accrete rooms: propose a shape, slide it toward the carved space
    until only a one-cell wall separates them, then open a door;
3.  carve a few extra L-shaped corridors between random room pairs;
4.  optionally flood a lake (water, lava, or a frozen pond) by random
    walk; corridors crossed by fluid become bridges;
5.  spread vegetation, then spend a decoration budget on sand, bog,
    burn patches, wall minerals and ice;
6.  enforce tile legality (bridges touch fluid, fire touches ashes) and
    repair connectivity by carving tunnels until the walkable cells form
    a single 4-connected component.

Every map is a pure function of its :class:`GenConfig`; corpora derive
per-index seeds with splitmix64 so generation is order-independent.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
from scipy import ndimage

from .errors import DataError
from .rng import derive_seed, make_rng
from .tiles import DEFAULT_SIZE, MapGrid, Tile, _WALKABLE_LOOKUP, validate_dims

FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)
_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    room_count: tuple[int, int] = (4, 9)
    lake_probability: float = 0.6
    lake_fluid_weights: tuple[float, float, float] = (0.6, 0.3, 0.1)  # water, lava, frozen
    vegetation_passes: int = 3
    decoration_budget: int = 12
    height: int = DEFAULT_SIZE
    width: int = DEFAULT_SIZE

    def __post_init__(self):
        lo, hi = self.room_count
        if lo < 1 or hi < lo:
            raise DataError(f"room_count range {self.room_count} is empty")
        if not 0.0 <= self.lake_probability <= 1.0:
            raise DataError("lake_probability must be in [0, 1]")
        if any(w < 0 for w in self.lake_fluid_weights) or sum(self.lake_fluid_weights) <= 0:
            raise DataError("lake fluid weights must be non-negative and not all zero")
        validate_dims(self.height, self.width)


@dataclass(frozen=True)
class GeneratedMap:
    grid: MapGrid
    rooms: tuple[frozenset, ...]
    corridors: tuple[frozenset, ...]
    seed: int


def _walkable(grid: np.ndarray) -> np.ndarray:
    return _WALKABLE_LOOKUP[grid]


def _label(mask: np.ndarray) -> tuple[np.ndarray, int]:
    labels, count = ndimage.label(mask, structure=FOUR_CONN)
    return labels, count


def _rect_cells(rng, h_max: int, w_max: int) -> np.ndarray:
    h = int(rng.integers(3, min(8, h_max - 2) + 1))
    w = int(rng.integers(3, min(8, w_max - 2) + 1))
    rr, cc = np.mgrid[0:h, 0:w]
    return np.stack([rr.ravel(), cc.ravel()], axis=1)


def _cave_cells(rng, h_max: int, w_max: int) -> np.ndarray:
    """Cave blob via two smoothing passes of a random field; largest component."""
    h = int(rng.integers(6, min(11, h_max - 2) + 1))
    w = int(rng.integers(6, min(11, w_max - 2) + 1))
    field_ = rng.random((h, w)) < 0.55
    for _ in range(2):
        neigh = ndimage.convolve(field_.astype(int), np.ones((3, 3), dtype=int), mode="constant")
        field_ = neigh >= 5
    labels, count = _label(field_)
    if count == 0:
        return _rect_cells(rng, h_max, w_max)
    sizes = ndimage.sum(field_, labels, index=range(1, count + 1))
    best = int(np.argmax(sizes)) + 1
    cells = np.argwhere(labels == best)
    if len(cells) < 6:
        return _rect_cells(rng, h_max, w_max)
    return cells - cells.min(axis=0)


def _propose_shape(rng, h_max: int, w_max: int) -> np.ndarray:
    if rng.random() < 0.35:
        return _cave_cells(rng, h_max, w_max)
    return _rect_cells(rng, h_max, w_max)


def _door_candidates(
    shape_abs: np.ndarray, occupied: np.ndarray, grid_shape: tuple[int, int]
) -> list[tuple[int, int]]:
    """Rock cells with one 4-neighbor in the proposal and one in the carved area."""
    h, w = grid_shape
    proposal = np.zeros(grid_shape, dtype=bool)
    proposal[shape_abs[:, 0], shape_abs[:, 1]] = True
    near_prop = ndimage.binary_dilation(proposal, structure=FOUR_CONN)
    near_occ = ndimage.binary_dilation(occupied, structure=FOUR_CONN)
    gap = near_prop & near_occ & ~proposal & ~occupied
    return [tuple(rc) for rc in np.argwhere(gap)]


def _try_place_room(rng, grid: np.ndarray, occupied: np.ndarray):
    """Slide a proposed shape toward the carved area; return (cells, door) or None."""
    h, w = grid.shape
    shape = _propose_shape(rng, h, w)
    extent = shape.max(axis=0) + 1
    if extent[0] > h - 2 or extent[1] > w - 2:
        return None
    r0 = int(rng.integers(1, h - extent[0]))
    c0 = int(rng.integers(1, w - extent[1]))
    dr, dc = _STEPS[int(rng.integers(0, 4))]
    near_occ = ndimage.binary_dilation(occupied, structure=FOUR_CONN)

    pos = np.array([r0, c0])
    for _ in range(max(h, w)):
        abs_cells = shape + pos
        if abs_cells[:, 0].min() < 1 or abs_cells[:, 0].max() >= h - 1:
            return None
        if abs_cells[:, 1].min() < 1 or abs_cells[:, 1].max() >= w - 1:
            return None
        touching = near_occ[abs_cells[:, 0], abs_cells[:, 1]].any()
        if not touching:
            doors = _door_candidates(abs_cells, occupied, grid.shape)
            if doors:
                door = doors[int(rng.integers(0, len(doors)))]
                return abs_cells, door
        else:
            # Overlapping or directly adjacent: back off one step and retry the gap.
            back = abs_cells - np.array([dr, dc])
            if back[:, 0].min() < 1 or back[:, 1].min() < 1:
                return None
            if back[:, 0].max() >= h - 1 or back[:, 1].max() >= w - 1:
                return None
            if near_occ[back[:, 0], back[:, 1]].any():
                return None
            doors = _door_candidates(back, occupied, grid.shape)
            if not doors:
                return None
            door = doors[int(rng.integers(0, len(doors)))]
            return back, door
        pos = pos + np.array([dr, dc])
    return None


def _carve_l_path(rng, a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    (r1, c1), (r2, c2) = a, b
    horizontal_first = bool(rng.integers(0, 2))
    cells = []
    if horizontal_first:
        cells += [(r1, c) for c in range(min(c1, c2), max(c1, c2) + 1)]
        cells += [(r, c2) for r in range(min(r1, r2), max(r1, r2) + 1)]
    else:
        cells += [(r, c1) for r in range(min(r1, r2), max(r1, r2) + 1)]
        cells += [(r2, c) for c in range(min(c1, c2), max(c1, c2) + 1)]
    seen, ordered = set(), []
    for cell in cells:
        if cell not in seen:
            seen.add(cell)
            ordered.append(cell)
    return ordered


def _random_walk_blob(rng, h: int, w: int, target: int) -> set[tuple[int, int]]:
    r = int(rng.integers(1, h - 1))
    c = int(rng.integers(1, w - 1))
    blob = {(r, c)}
    for _ in range(20 * target):
        if len(blob) >= target:
            break
        dr, dc = _STEPS[int(rng.integers(0, 4))]
        r = min(max(r + dr, 1), h - 2)
        c = min(max(c + dc, 1), w - 2)
        blob.add((r, c))
    return blob


def _grow_patch(rng, start: tuple[int, int], allowed: np.ndarray, size: int) -> list[tuple[int, int]]:
    """BFS region growth from start over cells where ``allowed`` is true."""
    patch = [start]
    member = {start}
    frontier = deque([start])
    h, w = allowed.shape
    while frontier and len(patch) < size:
        r, c = frontier.popleft()
        for dr, dc in _STEPS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and (nr, nc) not in member and allowed[nr, nc]:
                if rng.random() < 0.8:
                    member.add((nr, nc))
                    patch.append((nr, nc))
                    frontier.append((nr, nc))
                    if len(patch) >= size:
                        break
    return patch


def _bfs_bridge(walk: np.ndarray, from_mask: np.ndarray, to_mask: np.ndarray):
    """Shortest cell path from one region to another, crossing rock or fluid."""
    h, w = walk.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    parent = np.full((h, w, 2), -1, dtype=np.int32)
    queue = deque()
    for r, c in np.argwhere(from_mask):
        dist[r, c] = 0
        queue.append((int(r), int(c)))
    while queue:
        r, c = queue.popleft()
        for dr, dc in _STEPS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or dist[nr, nc] >= 0:
                continue
            dist[nr, nc] = dist[r, c] + 1
            parent[nr, nc] = (r, c)
            if to_mask[nr, nc]:
                path = []
                cur = (nr, nc)
                while cur is not None and not from_mask[cur]:
                    path.append(cur)
                    pr, pc = parent[cur]
                    cur = (int(pr), int(pc)) if pr >= 0 else None
                return path[::-1]
            queue.append((nr, nc))
    return []


def _vegetation_pass(rng, grid: np.ndarray) -> None:
    veg = (grid == Tile.GRASS) | (grid == Tile.FUNGUS)
    ground = grid == Tile.GROUND
    h, w = grid.shape
    chosen = np.full((h, w), -1, dtype=np.int16)
    near = np.zeros((h, w), dtype=bool)
    for dr, dc in _STEPS:
        shifted = np.zeros((h, w), dtype=bool)
        src_tiles = np.zeros((h, w), dtype=np.int16)
        rs = slice(max(dr, 0), h + min(dr, 0))
        rd = slice(max(-dr, 0), h + min(-dr, 0))
        cs = slice(max(dc, 0), w + min(dc, 0))
        cd = slice(max(-dc, 0), w + min(-dc, 0))
        shifted[rd, cd] = veg[rs, cs]
        src_tiles[rd, cd] = grid[rs, cs]
        first = shifted & (chosen < 0)
        chosen[first] = src_tiles[first]
        near |= shifted
    candidates = ground & near
    spread = candidates & (rng.random((h, w)) < 0.4)
    grid[spread] = chosen[spread].astype(grid.dtype)


def _apply_lake(rng, grid, corridor_cells: set, config: GenConfig) -> None:
    weights = np.array(config.lake_fluid_weights, dtype=float)
    fluid_kind = int(rng.choice(3, p=weights / weights.sum()))
    h, w = grid.shape
    target = int(rng.integers(20, 121))
    target = min(target, h * w // 4)
    blob = _random_walk_blob(rng, h, w, target)
    if fluid_kind == 2:  # frozen pond: icy shell, open water interior
        for r, c in sorted(blob):
            interior = all((r + dr, c + dc) in blob for dr, dc in _STEPS)
            tile = Tile.WATER if interior else Tile.ICE
            if (r, c) in corridor_cells and tile == Tile.WATER:
                tile = Tile.BRIDGE
            grid[r, c] = tile
    else:
        fluid = Tile.WATER if fluid_kind == 0 else Tile.LAVA
        for r, c in sorted(blob):
            grid[r, c] = Tile.BRIDGE if (r, c) in corridor_cells else fluid


def _decorate(rng, grid: np.ndarray, rooms: list[set], budget: int) -> None:
    kinds = ["sand", "bog", "burn", "stone", "crystal", "ice"]
    weights = np.array([2.0, 2.0, 2.0, 3.0, 1.0, 2.0])
    attempts = 0
    while budget > 0 and attempts < 40:
        attempts += 1
        kind = kinds[int(rng.choice(len(kinds), p=weights / weights.sum()))]
        if kind == "sand" and rooms:
            room = rooms[int(rng.integers(0, len(rooms)))]
            for r, c in sorted(room):
                if grid[r, c] == Tile.GROUND:
                    grid[r, c] = Tile.SAND
            budget -= 3
        elif kind == "bog":
            shore = _adjacent_to(grid, Tile.WATER) & (grid == Tile.GROUND)
            spots = np.argwhere(shore)
            if len(spots) == 0:
                continue
            take = min(len(spots), int(rng.integers(3, 9)))
            idx = rng.choice(len(spots), size=take, replace=False)
            for r, c in spots[np.sort(idx)]:
                grid[r, c] = Tile.BOG
            budget -= 2
        elif kind == "burn":
            burnable = (grid == Tile.GROUND) | (grid == Tile.GRASS) | (grid == Tile.FUNGUS)
            spots = np.argwhere(burnable)
            if len(spots) == 0:
                continue
            start = tuple(spots[int(rng.integers(0, len(spots)))])
            patch = _grow_patch(rng, start, burnable, int(rng.integers(4, 11)))
            for r, c in patch:
                grid[r, c] = Tile.ASHES
            n_fire = len(patch) // 3
            for r, c in patch[:n_fire]:
                grid[r, c] = Tile.FIRE
            budget -= 2
        elif kind in ("stone", "crystal"):
            wall = (grid == Tile.NONE) & _adjacent_to_walkable(grid)
            spots = np.argwhere(wall)
            if len(spots) == 0:
                continue
            start = tuple(spots[int(rng.integers(0, len(spots)))])
            patch = _grow_patch(rng, start, grid == Tile.NONE, int(rng.integers(2, 6)))
            tile = Tile.STONE if kind == "stone" else Tile.CRYSTAL
            for r, c in patch:
                grid[r, c] = tile
            budget -= 1
        elif kind == "ice":
            spots = np.argwhere(grid == Tile.WATER)
            if len(spots) == 0:
                continue
            take = min(len(spots), int(rng.integers(3, 7)))
            idx = rng.choice(len(spots), size=take, replace=False)
            for r, c in spots[np.sort(idx)]:
                grid[r, c] = Tile.ICE
            budget -= 1


def _adjacent_to(grid: np.ndarray, tile: Tile) -> np.ndarray:
    return ndimage.binary_dilation(grid == tile, structure=FOUR_CONN) & (grid != tile)


def _adjacent_to_walkable(grid: np.ndarray) -> np.ndarray:
    walk = _walkable(grid)
    return ndimage.binary_dilation(walk, structure=FOUR_CONN) & ~walk


def _enforce_legality(grid: np.ndarray) -> None:
    fluid_adj = ndimage.binary_dilation(
        (grid == Tile.WATER) | (grid == Tile.LAVA), structure=FOUR_CONN
    )
    bad_bridge = (grid == Tile.BRIDGE) & ~fluid_adj
    grid[bad_bridge] = Tile.GROUND
    ashes_adj = ndimage.binary_dilation(grid == Tile.ASHES, structure=FOUR_CONN)
    bad_fire = (grid == Tile.FIRE) & ~ashes_adj
    grid[bad_fire] = Tile.ASHES


def _repair_connectivity(grid: np.ndarray) -> list[list[tuple[int, int]]]:
    """Carve tunnels until a single walkable component remains; returns carvings."""
    carvings = []
    for _ in range(64):
        walk = _walkable(grid)
        labels, count = _label(walk)
        if count <= 1:
            break
        sizes = ndimage.sum(walk, labels, index=range(1, count + 1))
        main = int(np.argmax(sizes)) + 1
        path = _bfs_bridge(walk, labels == main, walk & (labels != main))
        if not path:
            break
        carved = []
        for r, c in path:
            if not _WALKABLE_LOOKUP[grid[r, c]]:
                grid[r, c] = (
                    Tile.BRIDGE if grid[r, c] in (Tile.WATER, Tile.LAVA) else Tile.GROUND
                )
                carved.append((r, c))
        if carved:
            carvings.append(carved)
    return carvings


def _assign_leftovers(grid: np.ndarray, rooms: list[set], corridors: list[set]) -> None:
    """Attach walkable cells outside all masks to the nearest mask by BFS."""
    h, w = grid.shape
    walk = _walkable(grid)
    owner = {}
    queue = deque()
    for idx, cells in enumerate(rooms):
        for cell in sorted(cells):
            owner[cell] = ("room", idx)
            queue.append(cell)
    for idx, cells in enumerate(corridors):
        for cell in sorted(cells):
            owner[cell] = ("corridor", idx)
            queue.append(cell)
    if not owner:
        cells = {(int(r), int(c)) for r, c in np.argwhere(walk)}
        if cells:
            rooms.append(cells)
        return
    while queue:
        r, c = queue.popleft()
        for dr, dc in _STEPS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and walk[nr, nc] and (nr, nc) not in owner:
                kind, idx = owner[(r, c)]
                owner[(nr, nc)] = (kind, idx)
                (rooms if kind == "room" else corridors)[idx].add((nr, nc))
                queue.append((nr, nc))


def generate(config: GenConfig) -> GeneratedMap:
    """Generate one playable map; a pure function of the config."""
    rng = make_rng(config.seed)
    h, w = config.height, config.width
    grid = np.full((h, w), int(Tile.NONE), dtype=np.int8)
    rooms: list[set] = []
    corridors: list[set] = []

    target_rooms = int(rng.integers(config.room_count[0], config.room_count[1] + 1))

    # Seed room near the center.
    shape = _propose_shape(rng, h, w)
    extent = shape.max(axis=0) + 1
    r0 = max(1, min(h - 1 - extent[0], h // 2 - extent[0] // 2 + int(rng.integers(-2, 3))))
    c0 = max(1, min(w - 1 - extent[1], w // 2 - extent[1] // 2 + int(rng.integers(-2, 3))))
    seed_cells = shape + np.array([r0, c0])
    grid[seed_cells[:, 0], seed_cells[:, 1]] = Tile.GROUND
    rooms.append({(int(r), int(c)) for r, c in seed_cells})

    occupied = np.zeros((h, w), dtype=bool)
    occupied[seed_cells[:, 0], seed_cells[:, 1]] = True

    failures = 0
    while len(rooms) < target_rooms and failures < 40:
        placed = _try_place_room(rng, grid, occupied)
        if placed is None:
            failures += 1
            continue
        abs_cells, door = placed
        grid[abs_cells[:, 0], abs_cells[:, 1]] = Tile.GROUND
        occupied[abs_cells[:, 0], abs_cells[:, 1]] = True
        grid[door] = Tile.GROUND
        occupied[door] = True
        rooms.append({(int(r), int(c)) for r, c in abs_cells})
        corridors.append({(int(door[0]), int(door[1]))})

    # Extra L-shaped corridors between random room pairs.
    if len(rooms) >= 2:
        for _ in range(int(rng.integers(0, 4))):
            ia, ib = rng.choice(len(rooms), size=2, replace=False)
            cells_a = sorted(rooms[int(ia)])
            cells_b = sorted(rooms[int(ib)])
            a = cells_a[int(rng.integers(0, len(cells_a)))]
            b = cells_b[int(rng.integers(0, len(cells_b)))]
            carved = set()
            for r, c in _carve_l_path(rng, a, b):
                if not _WALKABLE_LOOKUP[grid[r, c]]:
                    grid[r, c] = Tile.GROUND
                    carved.add((r, c))
            if carved:
                corridors.append(carved)

    corridor_cells = set().union(*corridors) if corridors else set()
    if rng.random() < config.lake_probability:
        _apply_lake(rng, grid, corridor_cells, config)

    # Vegetation seeds and stochastic spread over open ground.
    ground_spots = np.argwhere(grid == Tile.GROUND)
    if len(ground_spots) > 0:
        for _ in range(int(rng.integers(2, 7))):
            r, c = ground_spots[int(rng.integers(0, len(ground_spots)))]
            grid[r, c] = Tile.GRASS if rng.random() < 0.5 else Tile.FUNGUS
        for _ in range(config.vegetation_passes):
            _vegetation_pass(rng, grid)

    _decorate(rng, grid, rooms, config.decoration_budget)
    _enforce_legality(grid)

    repaired = [set(carved) for carved in _repair_connectivity(grid)]
    recarved = set().union(*repaired) if repaired else set()
    # A repair tunnel may leave a bridge with no fluid left beside it; demote
    # such cells to ground (stays walkable, so connectivity is preserved).
    _enforce_legality(grid)

    # Clip masks to what stayed walkable and absorb unassigned cells.
    # Repair tunnels own their cells even where a flooded room once stood.
    walk = _walkable(grid)
    rooms = [{c for c in room if walk[c]} - recarved for room in rooms]
    corridors = [{c for c in cor if walk[c]} - recarved for cor in corridors]
    corridors.extend(repaired)
    rooms = [r for r in rooms if r]
    corridors = [c for c in corridors if c]
    _assign_leftovers(grid, rooms, corridors)

    return GeneratedMap(
        grid=MapGrid(grid),
        rooms=tuple(frozenset(r) for r in rooms),
        corridors=tuple(frozenset(c) for c in corridors),
        seed=config.seed,
    )


def generate_corpus(count: int, base_seed: int, config: GenConfig | None = None) -> Iterator[GeneratedMap]:
    """Yield ``count`` maps; map i is seeded with splitmix64(base_seed, i)."""
    if count < 1:
        raise DataError("corpus count must be >= 1")
    config = config or GenConfig()
    for i in range(count):
        yield generate(replace(config, seed=derive_seed(base_seed, i)))
