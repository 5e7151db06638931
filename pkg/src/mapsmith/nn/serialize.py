"""Binary model files: a JSON config blob plus named float32 arrays.

Layout, all little-endian:

    "MSHM" | u32 version | u32 config-length | config JSON (utf-8)
    u32 param-count
    per parameter: u16 name-length | name | u8 ndim | u32 dims... | f32 data

The config carries the architecture hyperparameters; loaders rebuild
the parameter store from it and then check every stored array against
the expected shape, so a truncated or mismatched file fails loudly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"MSHM"
VERSION = 1


def save_model(path, config: dict, arrays: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            array = np.asarray(arrays[name], dtype="<f4")
            raw = name.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise DataError(f"parameter name too long: {name[:40]}...")
            if array.ndim > 0xFF:
                raise DataError(f"parameter {name!r} has too many dims")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", array.ndim))
            fh.write(struct.pack(f"<{array.ndim}I", *array.shape))
            fh.write(array.tobytes())


def load_model(path):
    """Read a model file back as (config dict, name -> float32 array)."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise DataError(f"{path} is not a model file (bad magic)")
    version, blob_len = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise DataError(f"unsupported model file version {version}")
    offset = 12
    try:
        config = json.loads(data[offset : offset + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path} has a corrupt config blob: {exc}") from exc
    offset += blob_len
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        end = offset + 4 * size
        if end > len(data):
            raise DataError(f"{path} is truncated at parameter {name!r}")
        arrays[name] = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape).copy()
        offset = end
    if offset != len(data):
        raise DataError(f"{path} has {len(data) - offset} trailing bytes")
    return config, arrays
