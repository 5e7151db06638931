"""Connectivity statistics over the walkable portion of a map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..tiles import MapGrid


@dataclass(frozen=True)
class ConnectivityReport:
    """Component census of a map's walkable cells, 4-connected."""

    components: int
    largest: int
    fragmentation: float  # 1 - largest / total walkable; 0 when nothing is walkable


def connectivity_report(grid: MapGrid) -> ConnectivityReport:
    mask = grid.walkable_mask()
    total = int(mask.sum())
    if total == 0:
        return ConnectivityReport(components=0, largest=0, fragmentation=0.0)
    # ndimage.label's default structure is the 4-neighbour cross.
    labels, count = ndimage.label(mask)
    largest = int(np.bincount(labels.ravel())[1:].max())
    return ConnectivityReport(
        components=int(count),
        largest=largest,
        fragmentation=float(1.0 - largest / total),
    )
