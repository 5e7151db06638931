"""Text embeddings: signed feature hashing, service client, corpus files.

The default embedder needs no model weights: tokens and adjacent token
pairs are hashed into a fixed number of buckets with FNV-1a, a second
hash picks each feature's sign, and the accumulated vector is length
normalized.  Unrelated texts then have near-zero expected dot product
while shared tokens pull cosines up, which is all the conditioning and
alignment stages require.  Swapping in a served model (for instance a
1024-dimensional pretrained encoder) is a config change; vectors from
either source go through the same normalization.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, NetworkError, UsageError
from .labeling import words_of

DEFAULT_DIM = 256
MIN_DIM = 16

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_SIGN_OFFSET = FNV_OFFSET ^ 0x5555555555555555
_MASK = (1 << 64) - 1

MAGIC = b"MSHE"
VERSION = 1


def _fnv1a(data: bytes, offset: int) -> int:
    h = offset
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK
    return h


def hashed_embed(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Signed hashed bag of unigrams and bigrams, unit length, float32."""
    if dim < MIN_DIM:
        raise UsageError(f"embedding dim must be >= {MIN_DIM}, got {dim}")
    tokens = words_of(text)
    features = [f"1:{t}" for t in tokens]
    features += [f"2:{a} {b}" for a, b in zip(tokens, tokens[1:])]
    vec = np.zeros(dim, dtype=np.float64)
    for feature in features:
        data = feature.encode("utf-8")
        index = _fnv1a(data, FNV_OFFSET) % dim
        sign = 1.0 if _fnv1a(data, _SIGN_OFFSET) & 1 == 0 else -1.0
        vec[index] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        out = np.zeros(dim, dtype=np.float32)
        out[0] = 1.0
        return out
    return (vec / norm).astype(np.float32)


@dataclass(frozen=True)
class ServiceConfig:
    endpoint: str
    dim: int = 1024
    max_retries: int = 3
    timeout: float = 30.0


def service_embed(text: str, cfg: ServiceConfig) -> np.ndarray:
    """Fetch a vector from an embedding service; renormalize locally."""
    import requests

    last_error = None
    for attempt in range(cfg.max_retries):
        try:
            response = requests.post(cfg.endpoint, json={"input": text}, timeout=cfg.timeout)
            response.raise_for_status()
            values = response.json()["embedding"]
        except requests.RequestException as exc:
            last_error = NetworkError(f"embedding request failed: {exc}")
            time.sleep(min(2.0, 0.2 * (2**attempt)))
            continue
        except (KeyError, TypeError) as exc:
            raise DataError(f"unexpected embedding response shape: {exc}") from exc
        vec = np.asarray(values, dtype=np.float64)
        if vec.ndim != 1 or len(vec) != cfg.dim:
            raise DataError(f"embedding dimension mismatch: expected {cfg.dim}, got {vec.shape}")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            out = np.zeros(cfg.dim, dtype=np.float32)
            out[0] = 1.0
            return out
        return (vec / norm).astype(np.float32)
    raise last_error


def description_ids(record_id: str):
    """Embedding ids for one record, dataset order: long 0-4 then short 0-4."""
    return [f"{record_id}:long{i}" for i in range(5)] + [
        f"{record_id}:short{i}" for i in range(5)
    ]


def embed_corpus(records, out_path, dim: int = DEFAULT_DIM, embedder=None) -> int:
    """Embed every description of every record into a vector file.

    Returns the number of vectors written.  ``embedder`` defaults to the
    hashed embedder; any callable text -> float32[dim] works.
    """
    if embedder is None:
        embedder = lambda text: hashed_embed(text, dim)
    entries = []
    for rec in records:
        if not rec.descriptions:
            raise DataError(f"record {rec.id} has no descriptions; run the label step first")
        texts = list(rec.descriptions["long"]) + list(rec.descriptions["short"])
        for entry_id, text in zip(description_ids(rec.id), texts):
            vec = np.asarray(embedder(text), dtype=np.float32)
            if vec.shape != (dim,):
                raise DataError(f"embedder returned shape {vec.shape}, expected ({dim},)")
            entries.append((entry_id, vec))
    write_embeddings(out_path, dim, entries)
    return len(entries)


def write_embeddings(path, dim: int, entries) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, dim, len(entries)))
        for entry_id, vec in entries:
            raw = entry_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise DataError(f"embedding id too long: {entry_id[:40]}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


def read_embeddings(path):
    """Read a vector file back as (dim, ordered list of (id, vector))."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise DataError(f"{path} is not an embedding file (bad magic)")
    version, dim, count = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise DataError(f"unsupported embedding file version {version}")
    offset = 16
    entries = []
    for _ in range(count):
        if offset + 2 > len(data):
            raise DataError(f"{path} is truncated")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        entry_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        end = offset + dim * 4
        if end > len(data):
            raise DataError(f"{path} is truncated")
        vec = np.frombuffer(data[offset:end], dtype="<f4").copy()
        offset = end
        entries.append((entry_id, vec))
    return dim, entries
