"""Dataset records and JSONL file I/O.

One record per map:

    {"id": str, "seed": int, "grid": [[int x W] x H],
     "meta": {...}?, "descriptions": {"long": [5 str], "short": [5 str]}?}

Serialization is canonical (sorted keys, compact separators) so that a
write/read/write round trip is byte-identical and artifacts hash stably.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError
from .tiles import MapGrid


@dataclass
class MapRecord:
    id: str
    seed: int
    grid: MapGrid
    meta: dict | None = None
    descriptions: dict | None = None

    def to_json_obj(self) -> dict:
        obj = {"id": self.id, "seed": self.seed, "grid": self.grid.to_lists()}
        if self.meta is not None:
            obj["meta"] = self.meta
        if self.descriptions is not None:
            obj["descriptions"] = self.descriptions
        return obj


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def record_from_obj(obj: dict, line_no: int | None = None) -> MapRecord:
    where = f" (line {line_no})" if line_no is not None else ""
    if not isinstance(obj, dict):
        raise DataError(f"record is not an object{where}")
    for key in ("id", "seed", "grid"):
        if key not in obj:
            raise DataError(f"record missing '{key}'{where}")
    try:
        grid = MapGrid.from_lists(obj["grid"])
    except DataError as exc:
        raise DataError(f"{exc}{where}") from exc
    descriptions = obj.get("descriptions")
    if descriptions is not None:
        if set(descriptions) != {"long", "short"} or any(
            not isinstance(v, list) for v in descriptions.values()
        ):
            raise DataError(f"descriptions must hold 'long' and 'short' lists{where}")
    return MapRecord(
        id=str(obj["id"]),
        seed=int(obj["seed"]),
        grid=grid,
        meta=obj.get("meta"),
        descriptions=descriptions,
    )


def read_records(path: str | Path) -> list[MapRecord]:
    return list(iter_records(path))


def iter_records(path: str | Path) -> Iterator[MapRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON (line {line_no}): {exc.msg}") from exc
            yield record_from_obj(obj, line_no)


def write_records(records: Iterable[MapRecord], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(canonical_json(rec.to_json_obj()))
            fh.write("\n")
            count += 1
    return count


def split_counts(total: int, ratios: tuple[float, ...] = (0.7, 0.2, 0.1)) -> tuple[int, ...]:
    """Partition sizes for the given ratios; rounding remainder goes to the first split."""
    if total < 0 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError("split ratios must be non-negative and sum to 1")
    counts = [int(total * r) for r in ratios]
    counts[0] += total - sum(counts)
    return tuple(counts)


def split_records(
    records: list[MapRecord], ratios: tuple[float, ...] = (0.7, 0.2, 0.1)
) -> tuple[list[MapRecord], ...]:
    """Contiguous deterministic split (train, test, validation by default)."""
    counts = split_counts(len(records), ratios)
    out, start = [], 0
    for n in counts:
        out.append(records[start : start + n])
        start += n
    return tuple(out)
