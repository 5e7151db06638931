"""HTTP service over trained models: generation, analysis, scoring.

Model parameters are loaded once and never mutated, so every endpoint
is safe under concurrent requests.  Generation is throttled by a
counting gate: up to ``max_concurrent`` run at once, up to
``queue_limit`` more wait, and anything beyond that is refused with
429.  JSON schemas for the request and response bodies ship in the
``schemas`` package directory and are listed by /api/version.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import Body, FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse

from . import __version__
from .errors import DataError, UsageError
from .evaluation import align_score, connectivity_report, load_aligner
from .metadata import extract_metadata_from_grid
from .render import render_ascii
from .tiles import TILE_CHARS, TILE_CLASS, TILE_COLORS, MapGrid, Tile

API_VERSION = "1"
MAX_PROMPT_BYTES = 2048

_SCHEMA_DIR = Path(__file__).parent / "schemas"


@dataclass
class ServeConfig:
    port: int = 8080
    host: str = "127.0.0.1"
    fdm_path: str | None = None
    ddm_path: str | None = None
    aligner_path: str | None = None
    static_dir: str | None = None
    max_concurrent: int = 4
    queue_limit: int = 16

    def __post_init__(self):
        if self.max_concurrent < 1 or self.queue_limit < 0:
            raise UsageError("max_concurrent must be >= 1 and queue_limit >= 0")


class _Gate:
    """Bounded admission: ``slots`` run, ``queue_limit`` more may wait."""

    def __init__(self, slots: int, queue_limit: int):
        self._sem = threading.Semaphore(slots)
        self._lock = threading.Lock()
        self._admitted = 0
        self._limit = slots + queue_limit

    def try_enter(self) -> bool:
        with self._lock:
            if self._admitted >= self._limit:
                return False
            self._admitted += 1
        self._sem.acquire()
        return True

    def leave(self) -> None:
        self._sem.release()
        with self._lock:
            self._admitted -= 1


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _parse_grid(value):
    if not isinstance(value, list) or not value:
        raise DataError("grid must be a non-empty array of rows")
    return MapGrid.from_lists(value)


def schema_names() -> list[str]:
    return sorted(p.stem for p in _SCHEMA_DIR.glob("*.json"))


def create_app(config: ServeConfig) -> FastAPI:
    models = {}
    if config.fdm_path:
        from .fdm import load_fdm

        models["fdm"] = load_fdm(config.fdm_path)
    if config.ddm_path:
        from .ddm import load_ddm

        models["ddm"] = load_ddm(config.ddm_path)
    aligner = load_aligner(config.aligner_path) if config.aligner_path else None
    gate = _Gate(config.max_concurrent, config.queue_limit)
    app = FastAPI(title="mapsmith", version=__version__, docs_url=None, redoc_url=None)

    # Body parsing failures should read as plain bad requests, not 422s.
    async def _validation_handler(request, exc):
        return _error(400, "request body must be a JSON object")

    app.add_exception_handler(RequestValidationError, _validation_handler)

    @app.get("/api/health")
    def health():
        loaded = [name for name in ("fdm", "ddm") if name in models]
        if not loaded:
            return JSONResponse({"status": "no models loaded", "models": []}, status_code=503)
        return {"status": "ok", "models": loaded}

    @app.get("/api/tiles")
    def tiles():
        return [
            {
                "id": int(tile),
                "name": tile.display_name,
                "color": list(TILE_COLORS[tile]),
                "char": TILE_CHARS[tile],
                "class": TILE_CLASS[tile],
            }
            for tile in Tile
        ]

    @app.get("/api/version")
    def version():
        return {"api": API_VERSION, "package": __version__, "schemas": schema_names()}

    @app.get("/api/schemas/{name}")
    def schema(name: str):
        path = _SCHEMA_DIR / f"{name}.json"
        if "/" in name or "\\" in name or not path.exists():
            return _error(404, f"no schema named {name!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    def _checked_prompt(payload):
        prompt = payload.get("prompt")
        if not isinstance(prompt, str) or not prompt.strip():
            raise DataError("prompt must be a non-empty string")
        if len(prompt.encode("utf-8")) > MAX_PROMPT_BYTES:
            raise DataError(f"prompt exceeds {MAX_PROMPT_BYTES} bytes")
        return prompt

    @app.post("/api/generate")
    def generate(payload: dict = Body(...)):
        name = payload.get("model")
        if not isinstance(name, str) or not name:
            return _error(400, "model name is required")
        if name not in models:
            return _error(404, f"model {name!r} is not loaded")
        try:
            prompt = _checked_prompt(payload)
        except DataError as exc:
            return _error(400, str(exc))
        seed = payload.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            return _error(400, "seed must be an integer")
        steps = payload.get("steps")
        dump_steps = payload.get("dump_steps", False)
        if steps is not None and name != "ddm":
            return _error(400, "steps only applies to the ddm model")
        if dump_steps and name != "ddm":
            return _error(400, "dump_steps only applies to the ddm model")
        model = models[name]
        if steps is not None:
            if not isinstance(steps, int) or isinstance(steps, bool) or steps < 1:
                return _error(400, "steps must be a positive integer")
            if steps > model.config.timesteps:
                return _error(
                    400, f"steps {steps} exceeds the trained schedule length {model.config.timesteps}"
                )
        if not gate.try_enter():
            return _error(429, "generation queue is full")
        try:
            start = time.perf_counter()
            frames = ()
            if name == "fdm":
                from .fdm import fdm_generate

                grid = fdm_generate(model, prompt, seed)
            else:
                from .ddm import ddm_sample, make_schedule, subsample_schedule

                schedule = None
                if steps is not None:
                    schedule = subsample_schedule(
                        make_schedule(model.config.timesteps), steps
                    )
                result = ddm_sample(
                    model, prompt, seed, schedule=schedule, dump_steps=bool(dump_steps)
                )
                grid, frames = result.grid, result.frames
            duration_ms = (time.perf_counter() - start) * 1000.0
        finally:
            gate.leave()
        body = {
            "grid": grid.to_lists(),
            "ascii": render_ascii(grid),
            "duration_ms": round(duration_ms, 3),
        }
        if frames:
            body["frames"] = [frame.to_lists() for frame in frames]
        return body

    @app.post("/api/analyze")
    def analyze(payload: dict = Body(...)):
        try:
            grid = _parse_grid(payload.get("grid"))
        except DataError as exc:
            return _error(400, str(exc))
        meta = extract_metadata_from_grid(grid)
        conn = connectivity_report(grid)
        return {
            "meta": meta.to_json_obj(),
            "connectivity": {
                "components": conn.components,
                "largest": conn.largest,
                "fragmentation": round(conn.fragmentation, 4),
            },
        }

    @app.post("/api/score")
    def score(payload: dict = Body(...)):
        if aligner is None:
            return _error(404, "no aligner model is loaded")
        try:
            prompt = _checked_prompt(payload)
            grid = _parse_grid(payload.get("grid"))
        except DataError as exc:
            return _error(400, str(exc))
        return {"aligner_score": round(align_score(aligner, prompt, grid), 4)}

    static_root = Path(config.static_dir).resolve() if config.static_dir else None
    if static_root is not None and static_root.is_dir():
        index = static_root / "index.html"

        @app.get("/{path:path}")
        def static(path: str):
            # Declared routes win; anything left under /api/ is a miss,
            # never a page, so clients get JSON errors not HTML.
            if path == "api" or path.startswith("api/"):
                return _error(404, f"no API route /{path}")
            target = (static_root / path).resolve() if path else index
            inside = target == static_root or static_root in target.parents
            if path and inside and target.is_file():
                return FileResponse(target)
            return FileResponse(index)

    else:

        @app.get("/{path:path}")
        def no_ui(path: str):
            if path == "api" or path.startswith("api/"):
                return _error(404, f"no API route /{path}")
            return _error(404, "no static assets configured")

    return app


def run_server(config: ServeConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")
