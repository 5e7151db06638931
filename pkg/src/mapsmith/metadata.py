"""Structural metadata for maps: rooms, corridors, directions, censuses.

Two entry points:

* :func:`extract_metadata` reads the room and corridor annotations that
  the generator tracked while carving, so the segmentation is exact.
* :func:`extract_metadata_from_grid` recovers a segmentation from a bare
  tile grid.  Corridor cells are found as chains of walkable cells with
  at most two walkable neighbors; what remains splits into rooms.  This
  is a heuristic: it finds one-cell-wide corridors, which is what the
  generator carves, and folds anything ambiguous into the nearest room.

Directions use a 3x3 partition of the map (northwest through southeast,
with center); a room's direction comes from its centroid cell.  Censuses
list (tile name, count) pairs, most frequent first, ties broken toward
the lower tile id.  Connected pairs record which rooms a corridor joins,
with the corridor path ordered walking away from the lower-numbered room.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .tiles import MapGrid, Tile, TILE_NAMES

DIRECTION_NAMES = (
    ("NW", "N", "NE"),
    ("W", "C", "E"),
    ("SW", "S", "SE"),
)

# Prose forms for description text; metadata itself keeps the short labels.
DIRECTION_PROSE = {
    "NW": "northwest",
    "N": "northern",
    "NE": "northeast",
    "W": "western",
    "C": "central",
    "E": "eastern",
    "SW": "southwest",
    "S": "southern",
    "SE": "southeast",
}

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)
_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))

MIN_CHAIN = 3  # shorter walkable chains read as parts of rooms
MIN_ROOM = 4


@dataclass(frozen=True)
class RoomMeta:
    index: int
    cells: tuple
    direction: str
    census: tuple


@dataclass(frozen=True)
class CorridorMeta:
    index: int
    cells: tuple


@dataclass(frozen=True)
class ConnectedPair:
    rooms: tuple
    path: tuple


@dataclass(frozen=True)
class MapMeta:
    rooms: tuple
    corridors: tuple
    connected_pairs: tuple
    census: tuple

    def to_json_obj(self) -> dict:
        return {
            "rooms": [
                {
                    "cells": [[int(r), int(c)] for r, c in room.cells],
                    "direction": room.direction,
                    "census": [[name, int(count)] for name, count in room.census],
                }
                for room in self.rooms
            ],
            "corridors": [
                {"cells": [[int(r), int(c)] for r, c in cor.cells]}
                for cor in self.corridors
            ],
            "connected_pairs": [
                {
                    "rooms": [int(x) for x in pair.rooms],
                    "path": [[int(r), int(c)] for r, c in pair.path],
                }
                for pair in self.connected_pairs
            ],
            "census": [[name, int(count)] for name, count in self.census],
        }


def meta_from_json_obj(obj: dict) -> MapMeta:
    try:
        rooms = tuple(
            RoomMeta(
                index=i,
                cells=tuple(tuple(c) for c in r["cells"]),
                direction=str(r["direction"]),
                census=tuple((str(n), int(k)) for n, k in r["census"]),
            )
            for i, r in enumerate(obj["rooms"])
        )
        corridors = tuple(
            CorridorMeta(index=i, cells=tuple(tuple(c) for c in cor["cells"]))
            for i, cor in enumerate(obj["corridors"])
        )
        pairs = tuple(
            ConnectedPair(
                rooms=tuple(int(x) for x in p["rooms"]),
                path=tuple(tuple(c) for c in p["path"]),
            )
            for p in obj["connected_pairs"]
        )
        census = tuple((str(n), int(k)) for n, k in obj["census"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed metadata object: {exc}") from exc
    return MapMeta(rooms=rooms, corridors=corridors, connected_pairs=pairs, census=census)


def direction_of(cells, height: int, width: int) -> str:
    """Direction band of a cell set's centroid on the 3x3 partition."""
    if not cells:
        raise DataError("direction of an empty cell set is undefined")
    arr = np.asarray(sorted(cells), dtype=float)
    cr, cc = arr.mean(axis=0)
    band_r = min(int(3 * cr / height), 2)
    band_c = min(int(3 * cc / width), 2)
    return DIRECTION_NAMES[band_r][band_c]


def census_of(grid: np.ndarray, cells=None) -> tuple:
    """(tile name, count) pairs, most frequent first, low tile id on ties."""
    if cells is None:
        values = np.asarray(grid).ravel()
    else:
        arr = np.asarray(sorted(cells), dtype=int)
        values = np.asarray(grid)[arr[:, 0], arr[:, 1]]
    counts = np.bincount(values, minlength=len(TILE_NAMES))
    order = sorted(range(len(TILE_NAMES)), key=lambda t: (-counts[t], t))
    return tuple((TILE_NAMES[t], int(counts[t])) for t in order if counts[t] > 0)


def segment_grid(grid: MapGrid) -> tuple[list, list]:
    """Split walkable cells into room and corridor cell sets.

    Chains of cells with walkable degree <= 2, at least MIN_CHAIN long,
    are corridors.  Connected remainders of size >= MIN_ROOM are rooms;
    smaller shards attach to the nearest room through walkable cells.
    """
    walk = grid.walkable_mask()
    h, w = walk.shape
    degree = np.zeros((h, w), dtype=int)
    padded = np.pad(walk, 1)
    for dr, dc in _STEPS:
        degree += padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
    low = walk & (degree <= 2)

    chain_labels, n_chains = ndimage.label(low, structure=_FOUR_CONN)
    corridor_mask = np.zeros((h, w), dtype=bool)
    corridors = []
    for lab in range(1, n_chains + 1):
        cells = np.argwhere(chain_labels == lab)
        if len(cells) >= MIN_CHAIN:
            corridors.append({(int(r), int(c)) for r, c in cells})
            corridor_mask[cells[:, 0], cells[:, 1]] = True

    rest = walk & ~corridor_mask
    room_labels, n_blobs = ndimage.label(rest, structure=_FOUR_CONN)
    rooms = []
    shards = []
    for lab in range(1, n_blobs + 1):
        cells = {(int(r), int(c)) for r, c in np.argwhere(room_labels == lab)}
        (rooms if len(cells) >= MIN_ROOM else shards).append(cells)

    if not rooms and (shards or corridors):
        # Degenerate map with no clear room: call the biggest piece a room.
        if shards:
            shards.sort(key=lambda s: (-len(s), min(s)))
            rooms.append(shards.pop(0))
        else:
            corridors.sort(key=lambda s: (-len(s), min(s)))
            rooms.append(corridors.pop(0))

    for shard in shards:
        target = _nearest_room(walk, rooms, shard)
        if target is not None:
            rooms[target] |= shard

    rooms.sort(key=lambda s: min(s))
    corridors.sort(key=lambda s: min(s))
    return rooms, corridors


def _nearest_room(walk: np.ndarray, rooms: list, shard: set):
    if not rooms:
        return None
    owner = {}
    queue = deque()
    for idx, room in enumerate(rooms):
        for cell in sorted(room):
            owner[cell] = idx
            queue.append(cell)
    h, w = walk.shape
    while queue:
        r, c = queue.popleft()
        if (r, c) in shard:
            return owner[(r, c)]
        for dr, dc in _STEPS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and walk[nr, nc] and (nr, nc) not in owner:
                owner[(nr, nc)] = owner[(r, c)]
                queue.append((nr, nc))
    return 0


def _room_contacts(corridor: set, rooms: list) -> dict:
    """room index -> corridor cells 4-adjacent to that room."""
    cell_owner = {}
    for idx, room in enumerate(rooms):
        for cell in room:
            cell_owner[cell] = idx
    contacts: dict = {}
    for r, c in corridor:
        for dr, dc in _STEPS:
            owner = cell_owner.get((r + dr, c + dc))
            if owner is not None:
                contacts.setdefault(owner, set()).add((r, c))
    return contacts


def _chain_path(corridor: set, sources: set, targets: set) -> tuple:
    """Shortest in-corridor path from any source cell to any target cell."""
    parent = {}
    queue = deque()
    for cell in sorted(sources):
        parent[cell] = None
        queue.append(cell)
    goal = None
    while queue:
        cell = queue.popleft()
        if cell in targets:
            goal = cell
            break
        r, c = cell
        for dr, dc in _STEPS:
            nxt = (r + dr, c + dc)
            if nxt in corridor and nxt not in parent:
                parent[nxt] = cell
                queue.append(nxt)
    if goal is None:
        return ()
    path = []
    cur = goal
    while cur is not None:
        path.append(cur)
        cur = parent[cur]
    return tuple(reversed(path))


def _corridor_pair(corridor: set, rooms: list):
    """The one room pair this corridor links: nearest rooms by chain ends.

    Returns (room_a, room_b, path) with room_a < room_b and the path
    running from beside room_a to beside room_b, or None when the chain
    touches fewer than two rooms.
    """
    contacts = _room_contacts(corridor, rooms)
    if len(contacts) < 2:
        return None
    degree = {}
    for r, c in corridor:
        degree[(r, c)] = sum(1 for dr, dc in _STEPS if (r + dr, c + dc) in corridor)
    endpoints = {cell for cell, deg in degree.items() if deg <= 1}
    at_ends = [idx for idx, cells in sorted(contacts.items()) if cells & endpoints]
    candidates = at_ends if len(at_ends) >= 2 else sorted(contacts)
    best = None
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            a, b = candidates[i], candidates[j]
            path = _chain_path(corridor, contacts[a], contacts[b])
            if path and (best is None or len(path) < len(best[2])):
                best = (a, b, path)
    return best


def _build_meta(grid: np.ndarray, rooms: list, corridors: list) -> MapMeta:
    h, w = grid.shape
    room_metas = tuple(
        RoomMeta(
            index=i,
            cells=tuple(sorted(room)),
            direction=direction_of(room, h, w),
            census=census_of(grid, room),
        )
        for i, room in enumerate(rooms)
    )
    corridor_metas = tuple(
        CorridorMeta(index=i, cells=tuple(sorted(cor))) for i, cor in enumerate(corridors)
    )

    best = {}
    for corridor in corridors:
        linked = _corridor_pair(corridor, rooms)
        if linked is None:
            continue
        a, b, path = linked
        key = (a, b)
        if key not in best or len(path) < len(best[key]):
            best[key] = path
    pairs = tuple(
        ConnectedPair(rooms=key, path=best[key]) for key in sorted(best)
    )
    return MapMeta(
        rooms=room_metas,
        corridors=corridor_metas,
        connected_pairs=pairs,
        census=census_of(grid),
    )


def extract_metadata(gmap) -> MapMeta:
    """Metadata from a generated map, using its carve-time annotations."""
    rooms = [set(r) for r in gmap.rooms]
    corridors = [set(c) for c in gmap.corridors]
    return _build_meta(np.asarray(gmap.grid.cells), rooms, corridors)


def extract_metadata_from_grid(grid: MapGrid) -> MapMeta:
    """Metadata from a bare grid, segmenting rooms and corridors first."""
    rooms, corridors = segment_grid(grid)
    return _build_meta(np.asarray(grid.cells), rooms, corridors)
