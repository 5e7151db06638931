"""Evaluation figures, written as image files next to the delimited reports.

Kept out of the package namespace so that metric-only callers never pay
the matplotlib import.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


_PALETTE = ("#4183d7", "#26a65b", "#d35400")


def _grouped(rows):
    """Split rows on their optional "model" column, keeping row order."""
    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(str(row.get("model", "")), []).append(row)
    return sorted(groups.items())


def scatter_figure(rows, path) -> Path:
    """Ground-truth vs generated aligner scores, one dot per prompt.

    Rows carrying a "model" column become separately coloured series.
    """
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.plot([0, 100], [0, 100], linestyle="--", linewidth=1, color="0.6")
    groups = _grouped(rows)
    for color, (label, group) in zip(_PALETTE, groups):
        xs = [row["truth_score"] for row in group]
        ys = [row["generated_score"] for row in group]
        ax.scatter(xs, ys, s=18, alpha=0.7, color=color, label=label or None)
    ax.set_xlim(0, 100)
    ax.set_ylim(0, 100)
    ax.set_xlabel("aligner score vs ground truth")
    ax.set_ylabel("aligner score vs generated")
    if len(groups) > 1:
        ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def connectivity_figure(rows, path) -> Path:
    """Component-count histogram beside the fragmentation spread.

    As with the scatter, a "model" column overlays one series per model
    so two generators land on shared axes.
    """
    comps = [row["components"] for row in rows]
    fig, (left, right) = plt.subplots(1, 2, figsize=(8.0, 3.5))
    bins = np.arange(min(comps), max(comps) + 2) - 0.5
    groups = _grouped(rows)
    for color, (label, group) in zip(_PALETTE, groups):
        left.hist(
            [row["components"] for row in group],
            bins=bins, alpha=0.75, color=color, label=label or None,
        )
        right.hist(
            [row["fragmentation"] for row in group],
            bins=10, range=(0.0, 1.0), alpha=0.75, color=color,
        )
    left.set_xlabel("walkable components")
    left.set_ylabel("maps")
    right.set_xlabel("fragmentation")
    if len(groups) > 1:
        left.legend()
    fig.tight_layout()
    return _save(fig, path)


def loss_figure(history, path) -> Path:
    """Training curve, with the validation track when one was recorded."""
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.plot(range(1, len(history.train) + 1), history.train, label="train")
    if history.val:
        ax.plot(range(1, len(history.val) + 1), history.val, label="val")
        ax.legend()
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    fig.tight_layout()
    return _save(fig, path)
