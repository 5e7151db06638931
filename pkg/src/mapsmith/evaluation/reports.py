"""Corpus-level evaluation: aggregate dicts for JSON plus per-item CSV rows.

Three modes cover the pipeline's needs: ``text`` scores description
overlap against references, ``map`` aggregates connectivity statistics
over a corpus of maps, and ``scatter`` pairs the aligner score of each
ground-truth map with the score of a generated one.  Text reports keep
a null SPICE column so downstream tables have a fixed layout even
though no scene-graph metric is computed.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DataError, UsageError
from ..tiles import MapGrid
from .aligner import Aligner, align_score
from .connectivity import connectivity_report
from .text import text_report

MODES = ("text", "map", "scatter")


def first_as_reference(descriptions: Sequence[str]) -> tuple[list[str], list[str]]:
    """Split a description group: the first entry references all the rest."""
    if len(descriptions) < 2:
        raise DataError("need at least 2 descriptions to hold one out as reference")
    return list(descriptions[1:]), [descriptions[0]]


def _stats(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": round(float(arr.mean()), 4), "stddev": round(float(arr.std()), 4)}


def text_eval(hypotheses: Sequence[str], references: Sequence[str]):
    """Average overlap metrics of each hypothesis against the reference set."""
    if not hypotheses:
        raise DataError("text evaluation got an empty corpus")
    if not references:
        raise DataError("text evaluation needs at least one reference")
    rows = []
    for i, hyp in enumerate(hypotheses):
        rep = text_report(hyp, references)
        rows.append(
            {
                "index": i,
                "bleu_1": round(rep.bleu[0], 4),
                "bleu_2": round(rep.bleu[1], 4),
                "bleu_3": round(rep.bleu[2], 4),
                "bleu_4": round(rep.bleu[3], 4),
                "rouge_l": round(rep.rouge_l, 4),
                "meteor": round(rep.meteor, 4),
                "spice": "",
            }
        )
    report = {
        "mode": "text",
        "count": len(rows),
        "bleu": [
            round(float(np.mean([r[f"bleu_{n}"] for r in rows])), 4) for n in (1, 2, 3, 4)
        ],
        "rouge_l": round(float(np.mean([r["rouge_l"] for r in rows])), 4),
        "meteor": round(float(np.mean([r["meteor"] for r in rows])), 4),
        "spice": None,
    }
    return report, rows


def grouped_text_eval(groups: Sequence[Sequence[str]]):
    """First-as-reference evaluation over many description groups, pooled.

    Each group supplies its own reference, so the averages cover every
    non-reference description in the corpus.
    """
    if not groups:
        raise DataError("text evaluation got an empty corpus")
    all_rows = []
    for gi, group in enumerate(groups):
        hyps, refs = first_as_reference(list(group))
        _, rows = text_eval(hyps, refs)
        for row in rows:
            all_rows.append({"group": gi, **row})
    report = {
        "mode": "text",
        "count": len(all_rows),
        "groups": len(groups),
        "bleu": [
            round(float(np.mean([r[f"bleu_{n}"] for r in all_rows])), 4)
            for n in (1, 2, 3, 4)
        ],
        "rouge_l": round(float(np.mean([r["rouge_l"] for r in all_rows])), 4),
        "meteor": round(float(np.mean([r["meteor"] for r in all_rows])), 4),
        "spice": None,
    }
    return report, all_rows


def map_eval(grids: Sequence[MapGrid]):
    """Mean and spread of the connectivity census over a map corpus."""
    if not grids:
        raise DataError("map evaluation got an empty corpus")
    rows = []
    for i, grid in enumerate(grids):
        rep = connectivity_report(grid)
        rows.append(
            {
                "index": i,
                "components": rep.components,
                "largest": rep.largest,
                "fragmentation": round(rep.fragmentation, 4),
            }
        )
    report = {
        "mode": "map",
        "count": len(rows),
        "metric_labels": {"fragmentation": "1 - largest component / walkable cells"},
        "components": _stats([r["components"] for r in rows]),
        "largest": _stats([r["largest"] for r in rows]),
        "fragmentation": _stats([r["fragmentation"] for r in rows]),
    }
    return report, rows


def scatter_eval(aligner: Aligner, entries: Sequence[tuple[str, MapGrid, MapGrid]]):
    """Aligner scores per prompt: ground-truth map beside a generated one."""
    if not entries:
        raise DataError("scatter evaluation got an empty corpus")
    rows = []
    for prompt, truth, generated in entries:
        rows.append(
            {
                "prompt": prompt,
                "truth_score": round(align_score(aligner, prompt, truth), 4),
                "generated_score": round(align_score(aligner, prompt, generated), 4),
            }
        )
    report = {
        "mode": "scatter",
        "count": len(rows),
        "metric_labels": {
            "truth_score": "aligner score vs ground truth",
            "generated_score": "aligner score vs generated",
        },
        "truth_score": _stats([r["truth_score"] for r in rows]),
        "generated_score": _stats([r["generated_score"] for r in rows]),
    }
    return report, rows


def corpus_eval(mode: str, **inputs):
    """Dispatch to one evaluation mode; returns (report dict, CSV rows).

    text mode wants ``hypotheses`` and ``references``, or a single
    ``descriptions`` group to which the first-as-reference split is
    applied; map mode wants ``grids``; scatter mode wants ``aligner``
    and ``entries`` of (prompt, truth, generated).
    """
    if mode == "text":
        if "descriptions" in inputs:
            hyps, refs = first_as_reference(inputs["descriptions"])
            return text_eval(hyps, refs)
        if "hypotheses" not in inputs or "references" not in inputs:
            raise UsageError("text mode needs hypotheses and references (or descriptions)")
        return text_eval(inputs["hypotheses"], inputs["references"])
    if mode == "map":
        if "grids" not in inputs:
            raise UsageError("map mode needs grids")
        return map_eval(inputs["grids"])
    if mode == "scatter":
        if "aligner" not in inputs or "entries" not in inputs:
            raise UsageError("scatter mode needs an aligner and entries")
        return scatter_eval(inputs["aligner"], inputs["entries"])
    raise UsageError(f"unknown eval mode {mode!r}; expected one of {MODES}")


def write_json(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_csv(path, rows: Sequence[dict]) -> Path:
    if not rows:
        raise DataError("no rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return path
