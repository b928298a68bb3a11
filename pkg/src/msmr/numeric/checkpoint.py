"""Flat named-array checkpoint container.

Layout (all integers little-endian)::

    magic        8 bytes   b"MSMRCKPT"
    version      u32       currently 1
    meta_len     u32       length of the UTF-8 JSON metadata blob
    meta         bytes     JSON object (model config etc.), may be "{}"
    count        u32       number of arrays
    repeated count times:
        name_len u32
        name     bytes     UTF-8
        ndim     u32
        dims     u32 * ndim
        payload  float64 little-endian, row-major, prod(dims) values
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"MSMRCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(arrays: Mapping[str, np.ndarray], meta: dict | None = None) -> bytes:
    meta_blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(meta_blob)), meta_blob]
    chunks.append(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    return b"".join(chunks)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic")
    pos = 8

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise CheckpointError("truncated checkpoint")
        vals = struct.unpack_from(fmt, blob, pos)
        pos += size
        return vals

    version, meta_len = take("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta = json.loads(blob[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    (count,) = take("<I")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = take("<I")
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = take("<I")
        dims = take(f"<{ndim}I") if ndim else ()
        n = int(np.prod(dims)) if dims else 1
        end = pos + 8 * n
        if end > len(blob):
            raise CheckpointError(f"truncated payload for {name!r}")
        arrays[name] = np.frombuffer(blob[pos:end], dtype="<f8").reshape(dims).astype(np.float64)
        pos = end
    return arrays, meta


def save(path: str | Path, arrays: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    from msmr.pipeline.atomic import atomic_write_bytes

    atomic_write_bytes(Path(path), dumps(arrays, meta))


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    return loads(Path(path).read_bytes())
