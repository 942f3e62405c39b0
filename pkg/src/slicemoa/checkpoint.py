"""Versioned binary checkpoint container with a JSON metadata sidecar.

Layout: magic "SLMC", format version, tensor count, then per tensor a
length-prefixed name, dtype code, shape, and the little-endian payload.
Tensors are written in sorted-name order and the sidecar is serialized with
sorted keys, so identical states produce byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CacheFormatError, DataError

MAGIC = b"SLMC"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f8"): 0, np.dtype("<f4"): 1}
_CODE_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def save_checkpoint(path, state: dict[str, np.ndarray], meta: dict):
    """Write tensors plus the metadata sidecar atomically."""
    path = Path(path)
    chunks = [MAGIC, struct.pack("<II", VERSION, len(state))]
    for name in sorted(state):
        arr = np.ascontiguousarray(state[name])
        dtype = np.dtype("<f8") if arr.dtype.itemsize == 8 else np.dtype("<f4")
        arr = arr.astype(dtype)
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<BB", _DTYPE_CODES[dtype], arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)
    meta_tmp = sidecar_path(path).with_suffix(".tmp")
    meta_tmp.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    meta_tmp.replace(sidecar_path(path))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CacheFormatError(f"{path}: bad magic, not a checkpoint")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CacheFormatError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    state: dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            code, ndim = struct.unpack_from("<BB", blob, offset)
            offset += 2
            shape = struct.unpack_from(f"<{ndim}I", blob, offset)
            offset += 4 * ndim
            dtype = _CODE_DTYPES[code]
            nbytes = int(np.prod(shape)) * dtype.itemsize
            if offset + nbytes > len(blob):
                raise CacheFormatError(f"{path}: truncated tensor payload for {name!r}")
            state[name] = np.frombuffer(blob, dtype=dtype, count=int(np.prod(shape)), offset=offset).reshape(shape).copy()
            offset += nbytes
        except (struct.error, KeyError) as e:
            raise CacheFormatError(f"{path}: corrupt tensor table ({e})") from None
    if offset != len(blob):
        raise CacheFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    meta_file = sidecar_path(path)
    if not meta_file.exists():
        raise DataError(f"checkpoint sidecar not found: {meta_file}")
    meta = json.loads(meta_file.read_text(encoding="utf-8"))
    return state, meta
