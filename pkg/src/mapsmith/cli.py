"""Command line entry point: one executable, one subcommand per stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 network error.
Log lines go to standard error as "timestamp stage message"; artifacts
go wherever the flags point.  A TOML or JSON file passed with --config
supplies defaults that explicit flags override.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import DataError, NetworkError, UsageError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NETWORK = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through the
    # shared error hierarchy instead so the code stays 1.
    def error(self, message):
        raise UsageError(message)


class _KeepSetSubParsers(argparse._SubParsersAction):
    """Let flags given before the subcommand survive its defaults.

    The stock action parses the subcommand into a fresh namespace and
    copies every attribute back, so `--seed 5 gen-maps` would be reset
    to the subparser's None default.  Every flag here defaults to None,
    which makes "went back to None" a reliable sign of clobbering.
    """

    def __call__(self, parser, namespace, values, option_string=None):
        before = {k: v for k, v in vars(namespace).items() if v is not None}
        super().__call__(parser, namespace, values, option_string)
        for key, value in before.items():
            if getattr(namespace, key, None) is None:
                setattr(namespace, key, value)


def _setup_logging(quiet: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        logging.Formatter("%(asctime)s %(name)s %(message)s", datefmt="%Y-%m-%dT%H:%M:%S")
    )
    root = logging.getLogger("mapsmith")
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING if quiet else logging.INFO)
    root.propagate = False


def _log(stage: str, message: str) -> None:
    logging.getLogger(f"mapsmith.{stage}").info(message)


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {path} does not exist")
    text = p.read_text(encoding="utf-8")
    if p.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"config file {path}: {exc}") from exc
    elif p.suffix == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"config file {path}: {exc}") from exc
    else:
        raise UsageError(f"config file must be .toml or .json, got {p.suffix!r}")
    if not isinstance(data, dict):
        raise DataError(f"config file {path} must hold a table of flag values")
    return data


def _merge(ns: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, then config file values, then explicit flags."""
    merged = dict(defaults)
    merged["seed"] = 0
    if getattr(ns, "config", None):
        file_values = _load_config_file(ns.config)
        unknown = set(file_values) - set(merged)
        if unknown:
            raise UsageError(f"config file keys not recognized: {sorted(unknown)}")
        merged.update(file_values)
    for key, value in vars(ns).items():
        if key in ("func", "config", "quiet", "command") or value is None:
            continue
        merged[key] = value
    missing = [k for k, v in merged.items() if v is _REQUIRED]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"missing required flags: {flags}")
    return merged


_REQUIRED = object()


def _parse_rooms(text: str) -> tuple[int, int]:
    parts = text.split("..")
    if len(parts) != 2:
        raise UsageError(f"rooms must look like A..B, got {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise UsageError(f"rooms must be integers, got {text!r}") from exc
    return lo, hi


# ------------------------------------------------------------- subcommands


def _cmd_gen_maps(ns):
    from .dataset import MapRecord, write_records
    from .dungeon import GenConfig, generate_corpus

    cfg = _merge(ns, {"count": _REQUIRED, "out": _REQUIRED, "rooms": None, "lake_prob": None})
    overrides = {}
    if cfg["rooms"] is not None:
        rooms = cfg["rooms"]
        overrides["room_count"] = _parse_rooms(rooms) if isinstance(rooms, str) else tuple(rooms)
    if cfg["lake_prob"] is not None:
        overrides["lake_probability"] = float(cfg["lake_prob"])
    base = GenConfig(**overrides)
    records = [
        MapRecord(id=f"map-{i:04d}", seed=g.seed, grid=g.grid)
        for i, g in enumerate(generate_corpus(int(cfg["count"]), int(cfg["seed"]), base))
    ]
    write_records(records, cfg["out"])
    _log("gen-maps", f"wrote {len(records)} maps to {cfg['out']}")


def _cmd_analyze(ns):
    from .dataset import read_records, write_records
    from .metadata import extract_metadata_from_grid
    from .render import render_overlay_ppm

    cfg = _merge(ns, {"in_path": _REQUIRED, "out": _REQUIRED, "overlay_dir": None})
    records = read_records(cfg["in_path"])
    out_records = []
    for rec in records:
        meta = extract_metadata_from_grid(rec.grid)
        out_records.append(replace(rec, meta=meta.to_json_obj()))
        if cfg["overlay_dir"]:
            overlay_dir = Path(cfg["overlay_dir"])
            overlay_dir.mkdir(parents=True, exist_ok=True)
            rooms = [set(map(tuple, room.cells)) for room in meta.rooms]
            corridors = [set(map(tuple, cor.cells)) for cor in meta.corridors]
            (overlay_dir / f"{rec.id}.ppm").write_bytes(
                render_overlay_ppm(rec.grid, rooms, corridors)
            )
            labels = {
                "id": rec.id,
                "rooms": [
                    {"index": i, "direction": room.direction}
                    for i, room in enumerate(meta.rooms)
                ],
            }
            (overlay_dir / f"{rec.id}.json").write_text(
                json.dumps(labels, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
    write_records(out_records, cfg["out"])
    _log("analyze", f"annotated {len(out_records)} maps into {cfg['out']}")


def _cmd_label(ns):
    from .dataset import read_records, write_records
    from .labeling import label_records

    cfg = _merge(
        ns,
        {
            "mode": "template",
            "in_path": _REQUIRED,
            "out": _REQUIRED,
            "endpoint": None,
            "model": None,
            "key_env": None,
            "concurrency": 4,
        },
    )
    llm_config = None
    if cfg["mode"] == "llm":
        from .llm import LlmConfig

        overrides = {}
        if cfg["endpoint"]:
            overrides["endpoint"] = cfg["endpoint"]
        if cfg["model"]:
            overrides["model"] = cfg["model"]
        if cfg["key_env"]:
            overrides["api_key_env"] = cfg["key_env"]
        llm_config = LlmConfig(**overrides)
    records = read_records(cfg["in_path"])
    labeled = label_records(
        records, mode=cfg["mode"], llm_config=llm_config, concurrency=int(cfg["concurrency"])
    )
    write_records(labeled, cfg["out"])
    _log("label", f"described {len(labeled)} maps into {cfg['out']}")


def _cmd_embed(ns):
    from .dataset import read_records
    from .embedding import ServiceConfig, embed_corpus, service_embed

    cfg = _merge(
        ns,
        {"in_path": _REQUIRED, "out": _REQUIRED, "dim": 256, "mode": "hashed", "endpoint": None},
    )
    dim = int(cfg["dim"])
    embedder = None
    if cfg["mode"] == "service":
        if not cfg["endpoint"]:
            raise UsageError("service mode needs --endpoint")
        service = ServiceConfig(endpoint=cfg["endpoint"], dim=dim)
        embedder = lambda text: service_embed(text, service)
    elif cfg["mode"] != "hashed":
        raise UsageError(f"unknown embed mode {cfg['mode']!r}")
    records = read_records(cfg["in_path"])
    n = embed_corpus(records, cfg["out"], dim=dim, embedder=embedder)
    _log("embed", f"wrote {n} vectors to {cfg['out']}")


def _training_pairs(data_path, embeds_path):
    from .dataset import read_records, split_records
    from .embedding import read_embeddings
    from .tiles import one_hot_encode

    records = read_records(data_path)
    dim, entries = read_embeddings(embeds_path)
    vectors = dict(entries)

    def pairs_of(recs):
        out = []
        for rec in recs:
            key = f"{rec.id}:long0"
            if key not in vectors:
                raise DataError(f"embedding {key} missing from {embeds_path}")
            out.append((vectors[key], one_hot_encode(rec.grid).values))
        return out

    train_recs, _, val_recs = split_records(records)
    return dim, pairs_of(train_recs), pairs_of(val_recs)


def _cmd_train(ns):
    cfg = _merge(
        ns,
        {
            "data": _REQUIRED,
            "embeds": _REQUIRED,
            "out": _REQUIRED,
            "epochs": None,
            "steps_t": None,
            "lr": None,
            "batch_size": None,
            "base_channels": None,
            "loss_figure": None,
        },
    )
    dim, train_pairs, val_pairs = _training_pairs(cfg["data"], cfg["embeds"])
    overrides = {
        key: kind(cfg[flag])
        for flag, key, kind in (
            ("epochs", "epochs", int),
            ("lr", "lr", float),
            ("batch_size", "batch_size", int),
            ("base_channels", "base_channels", int),
        )
        if cfg[flag] is not None
    }
    overrides["embed_dim"] = dim
    overrides["seed"] = int(cfg["seed"])
    which = ns.model_kind

    def progress(epoch, loss):
        if epoch == 1 or epoch % 25 == 0:
            _log(f"train-{which}", f"epoch {epoch} loss {loss:.5f}")

    if which == "fdm":
        from .fdm import FdmConfig, fdm_train, save_fdm

        model, history = fdm_train(
            train_pairs, FdmConfig(**overrides), val_pairs=val_pairs, progress=progress
        )
        save_fdm(cfg["out"], model)
    elif which == "ddm":
        from .ddm import DdmConfig, ddm_train, save_ddm

        if cfg["steps_t"] is not None:
            overrides["timesteps"] = int(cfg["steps_t"])
        model, history = ddm_train(
            train_pairs, DdmConfig(**overrides), val_pairs=val_pairs, progress=progress
        )
        save_ddm(cfg["out"], model)
    else:
        from .evaluation import AlignerConfig, save_aligner, train_aligner

        model, history = train_aligner(
            train_pairs,
            AlignerConfig(**overrides),
            val_pairs=val_pairs if len(val_pairs) >= 2 else (),
            progress=progress,
        )
        save_aligner(cfg["out"], model)
    if cfg["loss_figure"]:
        from .evaluation.figures import loss_figure

        loss_figure(history, cfg["loss_figure"])
    _log(f"train-{which}", f"saved {cfg['out']} after {len(history.train)} epochs")


def _load_generator(path):
    """Load a generator model file by its recorded kind."""
    from .nn import load_model

    kind = load_model(path)[0].get("kind")
    if kind == "fdm":
        from .fdm import load_fdm

        return "fdm", load_fdm(path)
    if kind == "ddm":
        from .ddm import load_ddm

        return "ddm", load_ddm(path)
    raise DataError(f"{path} holds kind {kind!r}, expected a generator model")


def _generate_one(kind, model, prompt, seed, steps=None, dump_steps=False):
    if kind == "fdm":
        from .fdm import fdm_generate

        return fdm_generate(model, prompt, seed), ()
    from .ddm import ddm_sample, make_schedule, subsample_schedule

    schedule = None
    if steps is not None:
        if steps > model.config.timesteps:
            raise UsageError(
                f"steps {steps} exceeds the trained schedule length {model.config.timesteps}"
            )
        schedule = subsample_schedule(make_schedule(model.config.timesteps), steps)
    result = ddm_sample(model, prompt, seed, schedule=schedule, dump_steps=dump_steps)
    return result.grid, result.frames


def _cmd_sample(ns):
    from .render import render_ascii, render_ppm

    cfg = _merge(
        ns,
        {
            "model": _REQUIRED,
            "prompt": _REQUIRED,
            "out": _REQUIRED,
            "steps": None,
            "dump_steps": False,
        },
    )
    kind, model = _load_generator(cfg["model"])
    steps = int(cfg["steps"]) if cfg["steps"] is not None else None
    if cfg["dump_steps"] and kind != "ddm":
        raise UsageError("--dump-steps only applies to diffusion models")
    grid, frames = _generate_one(
        kind, model, cfg["prompt"], int(cfg["seed"]), steps, bool(cfg["dump_steps"])
    )
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".txt":
        out.write_text(render_ascii(grid) + "\n", encoding="utf-8")
    elif out.suffix == ".ppm":
        out.write_bytes(render_ppm(grid))
    else:
        raise UsageError(f"sample output must end in .txt or .ppm, got {out.suffix!r}")
    for i, frame in enumerate(frames):
        frame_path = out.with_name(f"{out.stem}_step{i:02d}.ppm")
        frame_path.write_bytes(render_ppm(frame))
    _log("sample", f"wrote {out}" + (f" and {len(frames)} frames" if frames else ""))


def _read_lines(path) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"file {path} does not exist")
    return [line for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]


def _write_eval_outputs(report, rows, cfg, stage, figure_fn=None):
    from .evaluation import write_csv, write_json

    out = cfg.get("out")
    out_is_csv = out is not None and str(out).lower().endswith(".csv")
    if out:
        # The extension picks the format: .csv gets the per-item rows,
        # anything else gets the summary report as JSON.
        if out_is_csv:
            write_csv(out, rows)
        else:
            write_json(out, report)
        _log(stage, f"report at {out}")
    if cfg.get("csv"):
        write_csv(cfg["csv"], rows)
        _log(stage, f"rows at {cfg['csv']}")
    if cfg.get("json_out"):
        write_json(cfg["json_out"], report)
        _log(stage, f"report at {cfg['json_out']}")
    if not out and not cfg.get("json_out"):
        print(json.dumps(report, indent=2, sort_keys=True))
    if figure_fn is None:
        return
    target = cfg.get("figure")
    if target is None:
        # A delimited output implies a rendered figure beside it.
        base = cfg.get("csv") or (out if out_is_csv else None)
        if base is not None:
            target = Path(base).with_suffix(".png")
    if target is not None and rows:
        figure_fn(rows, target)
        _log(stage, f"figure at {target}")


def _model_grids(path, prompts, count, seed, steps):
    """Sample `count` maps from the model file, cycling over the prompts."""
    from .rng import derive_seed

    kind, model = _load_generator(path)
    grids = []
    for i in range(count):
        prompt = prompts[i % len(prompts)]
        grids.append(_generate_one(kind, model, prompt, derive_seed(seed, i), steps)[0])
    return kind, grids


def _map_eval_sources(cfg):
    """Collect (label, grids) corpora for map evaluation.

    Grids come from a stored corpus (--data), one model (--model), or an
    fdm/ddm pair for a side-by-side comparison.
    """
    model_paths = [p for p in (cfg["model"], cfg["fdm"], cfg["ddm"]) if p]
    if cfg["model"] and (cfg["fdm"] or cfg["ddm"]):
        raise UsageError("--model cannot be combined with --fdm/--ddm")
    sources = []
    if cfg["data"]:
        from .dataset import read_records

        records = read_records(cfg["data"])
        if cfg["count"] is not None:
            records = records[: int(cfg["count"])]
        if not records:
            raise DataError(f"{cfg['data']} holds no records")
        sources.append(("corpus", [rec.grid for rec in records]))
    if model_paths:
        if not cfg["prompts"] or cfg["count"] is None:
            raise UsageError("sampling a model corpus needs --prompts and --count")
        prompts = _read_lines(cfg["prompts"])
        if not prompts:
            raise DataError(f"{cfg['prompts']} holds no prompts")
        steps = int(cfg["steps"]) if cfg["steps"] is not None else None
        for path in model_paths:
            kind, grids = _model_grids(path, prompts, int(cfg["count"]), int(cfg["seed"]), steps)
            sources.append((kind, grids))
    if not sources:
        raise UsageError("map mode needs --model, --fdm/--ddm, or --data")
    labels = [label for label, _ in sources]
    if len(set(labels)) != len(labels):
        raise UsageError(f"map corpora must have distinct kinds, got {labels}")
    return sources


def _cmd_eval(ns):
    from .evaluation import corpus_eval

    mode = ns.eval_mode
    if mode == "text":
        cfg = _merge(
            ns,
            {"hyp": _REQUIRED, "refs": _REQUIRED, "out": None, "csv": None, "json_out": None},
        )
        report, rows = corpus_eval(
            "text", hypotheses=_read_lines(cfg["hyp"]), references=_read_lines(cfg["refs"])
        )
        _write_eval_outputs(report, rows, cfg, "eval-text")
        return
    if mode == "map":
        cfg = _merge(
            ns,
            {
                "model": None,
                "fdm": None,
                "ddm": None,
                "data": None,
                "prompts": None,
                "count": None,
                "steps": None,
                "out": None,
                "csv": None,
                "json_out": None,
                "figure": None,
            },
        )
        from .evaluation.figures import connectivity_figure

        sources = _map_eval_sources(cfg)
        if len(sources) == 1:
            label, grids = sources[0]
            report, rows = corpus_eval("map", grids=grids)
            report["model"] = label
        else:
            report = {"mode": "map", "models": {}}
            rows = []
            for label, grids in sources:
                sub, sub_rows = corpus_eval("map", grids=grids)
                del sub["mode"]
                report["models"][label] = sub
                rows.extend({"model": label, **row} for row in sub_rows)
            if {"fdm", "ddm"} <= report["models"].keys():
                fdm_mean = report["models"]["fdm"]["components"]["mean"]
                ddm_mean = report["models"]["ddm"]["components"]["mean"]
                report["ordering"] = {
                    "claim": "DDM has fewer disconnected components",
                    "holds": bool(ddm_mean < fdm_mean),
                    "components_mean": {"fdm": fdm_mean, "ddm": ddm_mean},
                }
        _write_eval_outputs(report, rows, cfg, "eval-map", connectivity_figure)
        return
    # scatter
    cfg = _merge(
        ns,
        {
            "fdm": None,
            "ddm": None,
            "aligner": _REQUIRED,
            "data": _REQUIRED,
            "out": _REQUIRED,
            "count": None,
            "steps": None,
            "csv": None,
            "json_out": None,
            "figure": None,
        },
    )
    from .dataset import read_records
    from .evaluation import load_aligner, scatter_eval
    from .evaluation.figures import scatter_figure
    from .rng import derive_seed

    models = []
    if cfg["fdm"]:
        models.append(_load_generator(cfg["fdm"]))
    if cfg["ddm"]:
        models.append(_load_generator(cfg["ddm"]))
    if not models:
        raise UsageError("scatter mode needs --fdm or --ddm (or both)")
    aligner = load_aligner(cfg["aligner"])
    records = read_records(cfg["data"])
    if cfg["count"] is not None:
        records = records[: int(cfg["count"])]
    steps = int(cfg["steps"]) if cfg["steps"] is not None else None
    all_rows = []
    report = {"mode": "scatter", "models": {}}
    for kind, model in models:
        entries = []
        for i, rec in enumerate(records):
            if not rec.descriptions:
                raise DataError(f"record {rec.id} has no descriptions")
            prompt = rec.descriptions["long"][0]
            seed = derive_seed(int(cfg["seed"]), 10_000 + i)
            entries.append((prompt, rec.grid, _generate_one(kind, model, prompt, seed, steps)[0]))
        sub, rows = scatter_eval(aligner, entries)
        report["models"][kind] = sub
        for row in rows:
            all_rows.append({"model": kind, **row} if len(models) > 1 else row)
    _write_eval_outputs(report, all_rows, cfg, "eval-scatter", scatter_figure)


def _cmd_serve(ns):
    cfg = _merge(
        ns,
        {
            "port": 8080,
            "fdm": None,
            "ddm": None,
            "aligner": None,
            "static": None,
            "max_concurrent": 4,
        },
    )
    from .server import ServeConfig, run_server

    run_server(
        ServeConfig(
            port=int(cfg["port"]),
            fdm_path=cfg["fdm"],
            ddm_path=cfg["ddm"],
            aligner_path=cfg["aligner"],
            static_dir=cfg["static"],
            max_concurrent=int(cfg["max_concurrent"]),
        )
    )


def _cmd_pipeline(ns):
    from .pipeline import PipelineConfig, run_pipeline

    cfg = _merge(
        ns,
        {
            "count": 64,
            "out_dir": _REQUIRED,
            "embed_dim": 256,
            "rooms": None,
            "lake_prob": None,
            "fdm_epochs": 200,
            "ddm_epochs": 100,
            "aligner_epochs": 150,
            "eval_samples": 8,
            "sample_steps": 50,
        },
    )
    rooms = cfg["rooms"]
    if isinstance(rooms, str):
        rooms = _parse_rooms(rooms)
    manifest = run_pipeline(
        PipelineConfig(
            out_dir=cfg["out_dir"],
            count=int(cfg["count"]),
            seed=int(cfg["seed"]),
            embed_dim=int(cfg["embed_dim"]),
            rooms=rooms,
            lake_prob=cfg["lake_prob"],
            fdm_epochs=int(cfg["fdm_epochs"]),
            ddm_epochs=int(cfg["ddm_epochs"]),
            aligner_epochs=int(cfg["aligner_epochs"]),
            eval_samples=int(cfg["eval_samples"]),
            sample_steps=int(cfg["sample_steps"]),
        ),
        log=_log,
    )
    _log("pipeline", f"manifest lists {len(manifest['artifacts'])} artifacts")


# ------------------------------------------------------------------ parser


def build_parser() -> _Parser:
    # Global flags are accepted both before and after the subcommand;
    # values set by the root win unless the subcommand repeats them.
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--quiet", action="store_true", default=None, help="suppress progress logging")
    common.add_argument("--config", default=None, help="TOML or JSON file with flag defaults")

    parser = _Parser(prog="mapsmith", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(
        dest="command", required=True, parser_class=_Parser, action=_KeepSetSubParsers
    )

    def add_parser(name, help_text):
        return sub.add_parser(name, help=help_text, parents=[common])

    p = add_parser("gen-maps", "generate a map corpus as JSONL")
    p.add_argument("--count", type=int)
    p.add_argument("--out")
    p.add_argument("--rooms", help="room count range, e.g. 4..9")
    p.add_argument("--lake-prob", type=float, dest="lake_prob")
    p.set_defaults(func=_cmd_gen_maps)

    p = add_parser("analyze", "attach region metadata to a map corpus")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--out")
    p.add_argument("--overlay-dir", dest="overlay_dir")
    p.set_defaults(func=_cmd_analyze)

    p = add_parser("label", "attach descriptions to analyzed maps")
    p.add_argument("--mode", choices=["template", "llm"])
    p.add_argument("--in", dest="in_path")
    p.add_argument("--out")
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--key-env", dest="key_env")
    p.add_argument("--concurrency", type=int)
    p.set_defaults(func=_cmd_label)

    p = add_parser("embed", "embed descriptions into a vector file")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--out")
    p.add_argument("--dim", type=int)
    p.add_argument("--mode", choices=["hashed", "service"])
    p.add_argument("--endpoint")
    p.set_defaults(func=_cmd_embed)

    p = add_parser("train", "train a model on a labeled corpus")
    p.add_argument("model_kind", choices=["fdm", "ddm", "aligner"])
    p.add_argument("--data")
    p.add_argument("--embeds")
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps-T", type=int, dest="steps_t")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--base-channels", type=int, dest="base_channels")
    p.add_argument("--out")
    p.add_argument("--loss-figure", dest="loss_figure")
    p.set_defaults(func=_cmd_train)

    p = add_parser("sample", "generate one map from a trained model")
    p.add_argument("--model")
    p.add_argument("--prompt")
    p.add_argument("--steps", type=int)
    p.add_argument("--dump-steps", action="store_true", default=None, dest="dump_steps")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sample)

    p = add_parser("eval", "run an evaluation report")
    p.add_argument("eval_mode", choices=["text", "map", "scatter"])
    p.add_argument("--hyp")
    p.add_argument("--refs")
    p.add_argument("--model")
    p.add_argument("--prompts")
    p.add_argument("--count", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--fdm")
    p.add_argument("--ddm")
    p.add_argument("--aligner")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.add_argument("--json", dest="json_out")
    p.add_argument("--figure")
    p.set_defaults(func=_cmd_eval)

    p = add_parser("serve", "serve models over HTTP")
    p.add_argument("--port", type=int)
    p.add_argument("--fdm")
    p.add_argument("--ddm")
    p.add_argument("--aligner")
    p.add_argument("--static")
    p.add_argument("--max-concurrent", type=int, dest="max_concurrent")
    p.set_defaults(func=_cmd_serve)

    p = add_parser("pipeline", "run every stage into one directory")
    p.add_argument("--count", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--embed-dim", type=int, dest="embed_dim")
    p.add_argument("--rooms")
    p.add_argument("--lake-prob", type=float, dest="lake_prob")
    p.add_argument("--fdm-epochs", type=int, dest="fdm_epochs")
    p.add_argument("--ddm-epochs", type=int, dest="ddm_epochs")
    p.add_argument("--aligner-epochs", type=int, dest="aligner_epochs")
    p.add_argument("--eval-samples", type=int, dest="eval_samples")
    p.add_argument("--sample-steps", type=int, dest="sample_steps")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        _setup_logging(bool(ns.quiet))
        ns.func(ns)
        return EXIT_OK
    except UsageError as exc:
        print(parser.format_usage(), end="", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        # Missing or unreadable input files count as bad data, not a crash.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NetworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NETWORK


if __name__ == "__main__":
    sys.exit(main())
