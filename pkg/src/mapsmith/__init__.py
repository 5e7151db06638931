"""Text-conditioned terrain map generation toolkit."""

__version__ = "0.1.0"

from .tiles import MapGrid, ProbMap, Tile, one_hot_encode, argmax_decode

__all__ = [
    "MapGrid",
    "ProbMap",
    "Tile",
    "one_hot_encode",
    "argmax_decode",
    "__version__",
]
