"""Tile vocabulary, map grids and probability maps.

The tileset is a fixed 14-symbol vocabulary of terrain tiles, with ids
assigned in alphabetical name order. Every tile belongs to exactly one
movement class:

* walkable - open terrain a player can stand on,
* hazard   - fluids that block movement (fire, lava, open water),
* solid    - rock, void and crystal walls.

A :class:`MapGrid` is an H x W array of tile ids (32 x 32 by default);
a :class:`ProbMap` is the H x W x C relaxation where each cell carries a
categorical distribution over the tileset.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DataError


class Tile(IntEnum):
    ASHES = 0
    BOG = 1
    BRIDGE = 2
    CRYSTAL = 3
    FIRE = 4
    FUNGUS = 5
    GRASS = 6
    GROUND = 7
    ICE = 8
    LAVA = 9
    NONE = 10
    SAND = 11
    STONE = 12
    WATER = 13

    @property
    def display_name(self) -> str:
        return self.name.capitalize() if self != Tile.NONE else "None"


TILE_COUNT = len(Tile)

TILE_NAMES = tuple(t.display_name for t in Tile)
NAME_TO_TILE = {t.display_name: t for t in Tile}

WALKABLE = frozenset(
    {Tile.ASHES, Tile.BOG, Tile.BRIDGE, Tile.FUNGUS, Tile.GRASS, Tile.GROUND, Tile.ICE, Tile.SAND}
)
HAZARD = frozenset({Tile.FIRE, Tile.LAVA, Tile.WATER})
SOLID = frozenset({Tile.CRYSTAL, Tile.NONE, Tile.STONE})

TILE_CLASS = {
    **{t: "walkable" for t in WALKABLE},
    **{t: "hazard" for t in HAZARD},
    **{t: "solid" for t in SOLID},
}

# One character per tile; injective so ASCII maps round-trip.
TILE_CHARS = {
    Tile.ASHES: ";",
    Tile.BOG: "b",
    Tile.BRIDGE: "=",
    Tile.CRYSTAL: "*",
    Tile.FIRE: "!",
    Tile.FUNGUS: "f",
    Tile.GRASS: '"',
    Tile.GROUND: ".",
    Tile.ICE: "_",
    Tile.LAVA: "%",
    Tile.NONE: "#",
    Tile.SAND: "s",
    Tile.STONE: "o",
    Tile.WATER: "~",
}
CHAR_TO_TILE = {c: t for t, c in TILE_CHARS.items()}

# RGB palette used for PPM rendering and served to the UI.
TILE_COLORS = {
    Tile.ASHES: (96, 93, 89),
    Tile.BOG: (96, 116, 72),
    Tile.BRIDGE: (158, 112, 58),
    Tile.CRYSTAL: (182, 222, 238),
    Tile.FIRE: (255, 122, 28),
    Tile.FUNGUS: (152, 82, 162),
    Tile.GRASS: (84, 158, 62),
    Tile.GROUND: (168, 140, 104),
    Tile.ICE: (198, 228, 248),
    Tile.LAVA: (228, 58, 22),
    Tile.NONE: (24, 22, 32),
    Tile.SAND: (222, 202, 142),
    Tile.STONE: (128, 130, 140),
    Tile.WATER: (52, 92, 198),
}

DEFAULT_SIZE = 32

_WALKABLE_LOOKUP = np.zeros(TILE_COUNT, dtype=bool)
for _t in WALKABLE:
    _WALKABLE_LOOKUP[_t.value] = True


def is_walkable(tile: int) -> bool:
    return bool(_WALKABLE_LOOKUP[tile])


def validate_dims(height: int, width: int) -> None:
    if height < 8 or width < 8 or height % 4 or width % 4:
        raise DataError(f"map dimensions must be >= 8 and divisible by 4, got {height}x{width}")


@dataclass(frozen=True)
class MapGrid:
    """Immutable H x W grid of tile ids."""

    cells: np.ndarray  # int8, shape (H, W)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int8)
        if cells.ndim != 2:
            raise DataError(f"grid must be 2-D, got shape {cells.shape}")
        validate_dims(*cells.shape)
        if cells.min() < 0 or cells.max() >= TILE_COUNT:
            raise DataError("grid contains tile ids outside [0, 13]")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def walkable_mask(self) -> np.ndarray:
        return _WALKABLE_LOOKUP[self.cells]

    def to_lists(self) -> list[list[int]]:
        return self.cells.astype(int).tolist()

    @classmethod
    def from_lists(cls, rows: list[list[int]]) -> "MapGrid":
        try:
            arr = np.asarray(rows)
        except ValueError as exc:  # ragged rows
            raise DataError("grid rows must form a rectangle") from exc
        if arr.dtype.kind not in "iu":
            raise DataError("grid rows must contain integers")
        if arr.ndim != 2:
            raise DataError("grid rows must form a rectangle")
        if arr.min(initial=0) < 0 or arr.max(initial=0) >= TILE_COUNT:
            raise DataError("grid contains tile ids outside [0, 13]")
        return cls(arr.astype(np.int8))

    @classmethod
    def filled(cls, tile: Tile, height: int = DEFAULT_SIZE, width: int = DEFAULT_SIZE) -> "MapGrid":
        return cls(np.full((height, width), int(tile), dtype=np.int8))


@dataclass(frozen=True)
class ProbMap:
    """H x W x C per-cell categorical distribution over tiles."""

    values: np.ndarray  # float32, shape (H, W, C)

    SUM_TOLERANCE = 1e-6

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 3:
            raise DataError(f"probability map must be 3-D, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def cell_sums(self) -> np.ndarray:
        return self.values.sum(axis=2)

    def is_normalized(self, tolerance: float = SUM_TOLERANCE) -> bool:
        if np.any(self.values < 0):
            return False
        return bool(np.all(np.abs(self.cell_sums() - 1.0) <= tolerance))


def one_hot_encode(grid: MapGrid) -> ProbMap:
    """Encode each cell as a unit basis vector over the tileset."""
    values = np.zeros((grid.height, grid.width, TILE_COUNT), dtype=np.float32)
    rows, cols = np.indices(grid.cells.shape)
    values[rows, cols, grid.cells] = 1.0
    return ProbMap(values)


def argmax_decode(pm: ProbMap) -> MapGrid:
    """Collapse each cell to its most probable tile; ties go to the lowest id."""
    if np.isnan(pm.values).any():
        raise DataError("probability map contains NaN")
    # np.argmax returns the first maximal index, which is the lowest tile id.
    return MapGrid(np.argmax(pm.values, axis=2).astype(np.int8))
