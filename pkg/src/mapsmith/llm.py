"""Chat-completion client for LLM-backed map labeling.

Speaks the common chat JSON shape: POST a messages array, read back
``choices[0].message.content``.  The reply must be exactly ten numbered
lines; lines 1-5 become long descriptions and 6-10 short ones.  Replies
that break the description rules trigger a retry with a correction
message appended so the model can fix its output; persistent violations
raise an error carrying the raw response for inspection.

The API key is read from an environment variable named in the config,
never passed as a value, so keys stay out of process listings and shell
history.
"""

from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass

import requests

from .dataset import MapRecord
from .errors import DataError, LabelFormatError, NetworkError, UsageError
from .labeling import DescriptionSet, build_pregen_prompt, build_round_prompt

DEFAULT_FEW_SHOT = [
    "A varied terrain with four main areas, each featuring a combination of "
    "ground and fungus. The northwest region is dotted with stone and ashes.",
    "Four area division across the map: ground, fungus, stone, and ashes.",
]

_NUMBERED_LINE = re.compile(r"^\s*(\d+)[.):]\s*(.+?)\s*$")


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str = "http://127.0.0.1:8000/v1/chat/completions"
    model: str = "gpt-4-turbo"
    api_key_env: str = "MAPSMITH_API_KEY"
    max_retries: int = 3
    timeout: float = 30.0
    temperature: float = 0.7

    def __post_init__(self):
        if self.max_retries < 1:
            raise DataError("max_retries must be >= 1")


class TokenBucket:
    """Small thread-safe rate limiter shared by concurrent labelers."""

    def __init__(self, rate: float = 5.0, burst: int = 5):
        self.rate = rate
        self.capacity = burst
        self.tokens = float(burst)
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self):
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


def parse_numbered_reply(content: str) -> DescriptionSet:
    """Parse a 10-line numbered reply into a 5 long / 5 short set."""
    entries = {}
    for line in content.splitlines():
        match = _NUMBERED_LINE.match(line)
        if match:
            entries[int(match.group(1))] = match.group(2)
    missing = [n for n in range(1, 11) if n not in entries]
    if missing:
        raise LabelFormatError(
            f"reply must contain lines numbered 1-10; missing {missing}", raw_response=content
        )
    described = DescriptionSet(
        long=tuple(entries[n] for n in range(1, 6)),
        short=tuple(entries[n] for n in range(6, 11)),
    )
    violations = described.violations()
    if violations:
        raise LabelFormatError(
            "reply violates description rules: " + "; ".join(violations), raw_response=content
        )
    return described


def _post_chat(cfg: LlmConfig, key: str, messages: list) -> str:
    payload = {"model": cfg.model, "messages": messages, "temperature": cfg.temperature}
    response = requests.post(
        cfg.endpoint,
        json=payload,
        headers={"Authorization": f"Bearer {key}"},
        timeout=cfg.timeout,
    )
    response.raise_for_status()
    body = response.json()
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise LabelFormatError(
            f"unexpected chat response shape: {exc}", raw_response=str(body)
        ) from exc


def llm_label(round_prompt: str, bundle=None, cfg: LlmConfig | None = None) -> DescriptionSet:
    """Label one map through the chat endpoint, retrying on bad replies."""
    cfg = cfg or LlmConfig()
    bundle = bundle or build_pregen_prompt(DEFAULT_FEW_SHOT)
    key = os.environ.get(cfg.api_key_env)
    if not key:
        raise UsageError(
            f"no API key: set the {cfg.api_key_env} environment variable to use llm mode"
        )
    messages = [
        {"role": "system", "content": bundle.render()},
        {"role": "user", "content": round_prompt},
    ]
    last_error = None
    for attempt in range(cfg.max_retries):
        try:
            content = _post_chat(cfg, key, messages)
        except requests.RequestException as exc:
            last_error = NetworkError(f"chat request failed: {exc}")
            time.sleep(min(2.0, 0.2 * (2**attempt)))
            continue
        try:
            return parse_numbered_reply(content)
        except LabelFormatError as exc:
            last_error = exc
            messages = messages + [
                {"role": "assistant", "content": content},
                {
                    "role": "user",
                    "content": (
                        "That reply was invalid: "
                        f"{exc}. Send exactly 10 numbered lines, 1-5 long "
                        "(1-3 sentences each), 6-10 short (5-15 words each), "
                        "all distinct, without banned words."
                    ),
                },
            ]
    raise last_error


def label_records_llm(records, cfg: LlmConfig | None = None, concurrency: int = 4) -> list:
    """Label many records through the endpoint with a bounded worker pool."""
    from concurrent.futures import ThreadPoolExecutor

    from .metadata import MapMeta, meta_from_json_obj

    cfg = cfg or LlmConfig()
    bundle = build_pregen_prompt(DEFAULT_FEW_SHOT)
    bucket = TokenBucket()

    def one(rec: MapRecord) -> MapRecord:
        if rec.meta is None:
            raise DataError(f"record {rec.id} has no metadata; run the analyze step first")
        meta = rec.meta if isinstance(rec.meta, MapMeta) else meta_from_json_obj(rec.meta)
        bucket.acquire()
        described = llm_label(build_round_prompt(rec.grid, meta), bundle, cfg)
        return MapRecord(
            id=rec.id,
            seed=rec.seed,
            grid=rec.grid,
            meta=rec.meta,
            descriptions={"long": list(described.long), "short": list(described.short)},
        )

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        return list(pool.map(one, records))
