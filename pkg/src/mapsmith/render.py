"""Map rendering: ASCII text, binary PPM images, and metadata overlays."""

from __future__ import annotations

import numpy as np

from .tiles import MapGrid, Tile, TILE_CHARS, TILE_COLORS


def render_ascii(grid: MapGrid) -> str:
    """One character per tile (legend in ``tiles.TILE_CHARS``), rows joined by newlines."""
    lookup = np.array([TILE_CHARS[Tile(i)] for i in range(len(Tile))])
    return "\n".join("".join(row) for row in lookup[grid.cells])


def _palette_array() -> np.ndarray:
    pal = np.zeros((len(Tile), 3), dtype=np.uint8)
    for tile, rgb in TILE_COLORS.items():
        pal[tile.value] = rgb
    return pal


def render_ppm(grid: MapGrid, scale: int = 8) -> bytes:
    """Binary P6 image, one flat color per tile, ``scale`` pixels per cell."""
    if scale < 1:
        raise ValueError("scale must be >= 1")
    pixels = _palette_array()[grid.cells]
    pixels = np.repeat(np.repeat(pixels, scale, axis=0), scale, axis=1)
    header = f"P6\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii")
    return header + pixels.tobytes()


# Distinct overlay colors for room masks (cycled when rooms exceed the list).
ROOM_OVERLAY_COLORS = [
    (214, 69, 65),
    (65, 131, 215),
    (38, 166, 91),
    (244, 179, 80),
    (155, 89, 182),
    (54, 215, 183),
    (240, 98, 146),
    (168, 204, 88),
]

CORRIDOR_OVERLAY_COLOR = (250, 250, 250)


def render_overlay_ppm(grid: MapGrid, rooms, corridors, scale: int = 8) -> bytes:
    """Room/corridor mask visualization: rooms colored per id, corridors white.

    ``rooms`` and ``corridors`` are sequences of cell sets as produced by
    region segmentation. Cells outside any mask keep their terrain color.
    """
    pixels = _palette_array()[grid.cells].astype(np.int16)
    for idx, cells in enumerate(rooms):
        color = np.array(ROOM_OVERLAY_COLORS[idx % len(ROOM_OVERLAY_COLORS)], dtype=np.int16)
        for r, c in cells:
            pixels[r, c] = (pixels[r, c] + 2 * color) // 3
    for cells in corridors:
        color = np.array(CORRIDOR_OVERLAY_COLOR, dtype=np.int16)
        for r, c in cells:
            pixels[r, c] = (pixels[r, c] + 2 * color) // 3
    pixels = pixels.astype(np.uint8)
    pixels = np.repeat(np.repeat(pixels, scale, axis=0), scale, axis=1)
    header = f"P6\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii")
    return header + pixels.tobytes()
