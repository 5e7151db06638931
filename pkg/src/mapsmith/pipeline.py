"""End-to-end pipeline: generate, analyze, label, embed, train, evaluate.

Stage boundaries match the CLI subcommands one to one, and every stage
reads its input back from the file the previous stage wrote, so a
pipeline run produces byte-identical artifacts to running the
subcommands by hand.  The manifest lists the eight data artifacts with
content hashes; figures and CSV tables ride alongside unhashed, since
image and table encoding is not part of the determinism contract.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from .dataset import MapRecord, read_records, split_records, write_records
from .ddm import (
    DdmConfig,
    ddm_sample,
    ddm_train,
    load_ddm,
    make_schedule,
    save_ddm,
    subsample_schedule,
)
from .dungeon import GenConfig, generate_corpus
from .embedding import embed_corpus, read_embeddings
from .errors import DataError
from .evaluation import (
    AlignerConfig,
    grouped_text_eval,
    load_aligner,
    map_eval,
    save_aligner,
    scatter_eval,
    train_aligner,
    write_csv,
    write_json,
)
from .evaluation.figures import connectivity_figure, loss_figure, scatter_figure
from .fdm import FdmConfig, fdm_generate, fdm_train, load_fdm, save_fdm
from .labeling import label_records
from .metadata import extract_metadata_from_grid
from .rng import derive_seed
from .tiles import one_hot_encode

ARTIFACTS = (
    "maps.jsonl",
    "maps_meta.jsonl",
    "dataset.jsonl",
    "embeds.bin",
    "fdm.mshm",
    "ddm.mshm",
    "aligner.mshm",
    "eval_report.json",
)


@dataclass
class PipelineConfig:
    out_dir: Path | str
    count: int = 64
    seed: int = 0
    embed_dim: int = 256
    rooms: tuple[int, int] | None = None
    lake_prob: float | None = None
    fdm_epochs: int = 200
    ddm_epochs: int = 100
    aligner_epochs: int = 150
    eval_samples: int = 8
    sample_steps: int = 50

    def __post_init__(self):
        # The 0.7/0.2/0.1 split needs at least this much to leave a
        # non-empty test slice for the evaluation stage.
        if self.count < 6:
            raise DataError("pipeline needs at least 6 maps")
        if self.eval_samples < 1 or self.sample_steps < 1:
            raise DataError("eval_samples and sample_steps must be >= 1")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _long0_pairs(records, vectors, dim):
    """(embedding, one-hot grid) per record, keyed on the first long description."""
    pairs = []
    for rec in records:
        key = f"{rec.id}:long0"
        if key not in vectors:
            raise DataError(f"embedding {key} missing from vector file")
        pairs.append((vectors[key], one_hot_encode(rec.grid).values))
    return pairs


def run_pipeline(config: PipelineConfig, log: Callable[[str, str], None] | None = None) -> dict:
    """Run every stage into ``config.out_dir`` and return the manifest.

    A stage failure propagates after a log line naming the stage;
    artifacts written so far stay on disk.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    figures_dir = out / "figures"
    say = log if log is not None else (lambda stage, message: None)

    def run_stage(name: str, fn):
        say(name, "start")
        try:
            result = fn()
        except Exception as exc:
            say(name, f"failed: {exc}")
            raise
        say(name, "done")
        return result

    def gen_stage():
        overrides = {}
        if config.rooms is not None:
            overrides["room_count"] = tuple(config.rooms)
        if config.lake_prob is not None:
            overrides["lake_probability"] = config.lake_prob
        base = GenConfig(**overrides)
        records = [
            MapRecord(id=f"map-{i:04d}", seed=g.seed, grid=g.grid)
            for i, g in enumerate(generate_corpus(config.count, config.seed, base))
        ]
        write_records(records, out / "maps.jsonl")

    def analyze_stage():
        records = read_records(out / "maps.jsonl")
        with_meta = [
            replace(rec, meta=extract_metadata_from_grid(rec.grid).to_json_obj())
            for rec in records
        ]
        write_records(with_meta, out / "maps_meta.jsonl")

    def label_stage():
        records = read_records(out / "maps_meta.jsonl")
        write_records(label_records(records, mode="template"), out / "dataset.jsonl")

    def embed_stage():
        records = read_records(out / "dataset.jsonl")
        n = embed_corpus(records, out / "embeds.bin", dim=config.embed_dim)
        say("embed", f"{n} vectors at dim {config.embed_dim}")

    def split_pairs():
        records = read_records(out / "dataset.jsonl")
        dim, entries = read_embeddings(out / "embeds.bin")
        vectors = dict(entries)
        train_recs, test_recs, val_recs = split_records(records)
        return (
            dim,
            _long0_pairs(train_recs, vectors, dim),
            _long0_pairs(val_recs, vectors, dim),
            test_recs or train_recs,
        )

    def fdm_stage():
        dim, train_pairs, val_pairs, _ = split_pairs()
        # Narrower and slower than the model defaults: at corpus scale
        # the wider net with lr 1e-3 saturates into an unconditional
        # mean predictor before the conditioning pathway forms.
        cfg = FdmConfig(
            embed_dim=dim,
            base_channels=32,
            lr=3e-4,
            epochs=config.fdm_epochs,
            batch_size=16,
            seed=config.seed,
        )
        model, history = fdm_train(
            train_pairs,
            cfg,
            val_pairs=val_pairs,
            progress=lambda e, l: say("train-fdm", f"epoch {e} loss {l:.5f}")
            if e % 25 == 0 or e == config.fdm_epochs
            else None,
        )
        save_fdm(out / "fdm.mshm", model)
        loss_figure(history, figures_dir / "fdm_loss.png")

    def ddm_stage():
        dim, train_pairs, val_pairs, _ = split_pairs()
        cfg = DdmConfig(
            embed_dim=dim,
            base_channels=32,
            epochs=config.ddm_epochs,
            batch_size=8,
            seed=config.seed,
        )
        model, history = ddm_train(
            train_pairs,
            cfg,
            val_pairs=val_pairs,
            progress=lambda e, l: say("train-ddm", f"epoch {e} loss {l:.5f}")
            if e % 10 == 0 or e == config.ddm_epochs
            else None,
        )
        save_ddm(out / "ddm.mshm", model)
        loss_figure(history, figures_dir / "ddm_loss.png")

    def aligner_stage():
        dim, train_pairs, val_pairs, _ = split_pairs()
        cfg = AlignerConfig(
            embed_dim=dim,
            epochs=config.aligner_epochs,
            batch_size=8,
            seed=config.seed,
        )
        model, history = train_aligner(
            train_pairs, cfg, val_pairs=val_pairs if len(val_pairs) >= 2 else ()
        )
        save_aligner(out / "aligner.mshm", model)
        loss_figure(history, figures_dir / "aligner_loss.png")

    def eval_stage():
        _, _, _, test_recs = split_pairs()
        subjects = test_recs[: config.eval_samples]
        fdm = load_fdm(out / "fdm.mshm")
        ddm = load_ddm(out / "ddm.mshm")
        aligner = load_aligner(out / "aligner.mshm")
        steps = min(config.sample_steps, ddm.config.timesteps)
        schedule = subsample_schedule(make_schedule(ddm.config.timesteps), steps)

        text_report, text_rows = grouped_text_eval(
            [rec.descriptions["long"] for rec in subjects]
        )
        write_csv(out / "eval_text.csv", text_rows)
        report = {"text": text_report, "map": {}, "scatter": {}}

        for name in ("fdm", "ddm"):
            entries = []
            for i, rec in enumerate(subjects):
                prompt = rec.descriptions["long"][0]
                gseed = derive_seed(config.seed, 10_000 + i)
                if name == "fdm":
                    grid = fdm_generate(fdm, prompt, gseed)
                else:
                    grid = ddm_sample(ddm, prompt, gseed, schedule=schedule).grid
                entries.append((prompt, rec.grid, grid))
            map_report, map_rows = map_eval([g for _, _, g in entries])
            scatter_report, scatter_rows = scatter_eval(aligner, entries)
            report["map"][name] = map_report
            report["scatter"][name] = scatter_report
            write_csv(out / f"eval_map_{name}.csv", map_rows)
            write_csv(out / f"eval_scatter_{name}.csv", scatter_rows)
            connectivity_figure(map_rows, figures_dir / f"connectivity_{name}.png")
            scatter_figure(scatter_rows, figures_dir / f"scatter_{name}.png")
        write_json(out / "eval_report.json", report)

    run_stage("gen-maps", gen_stage)
    run_stage("analyze", analyze_stage)
    run_stage("label", label_stage)
    run_stage("embed", embed_stage)
    run_stage("train-fdm", fdm_stage)
    run_stage("train-ddm", ddm_stage)
    run_stage("train-aligner", aligner_stage)
    run_stage("eval", eval_stage)

    manifest = {
        "count": config.count,
        "seed": config.seed,
        "artifacts": [
            {"path": name, "sha256": _sha256(out / name)} for name in ARTIFACTS
        ],
        "figures": sorted(
            str(p.relative_to(out)) for p in figures_dir.glob("*.png")
        ),
        "tables": sorted(str(p.relative_to(out)) for p in out.glob("eval_*.csv")),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
