"""Writer for the SLCE embedding-cache format.

Shared byte contract with the training-side reader: magic "SLCE", version,
embedding width, row count, a length-prefixed id index, then the row-major
float32 little-endian matrix. This module is an independent implementation
of the contract; the training side validates magic, version, and length.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SLCE"
VERSION = 1


def serialize(ids: list[str], matrix: np.ndarray) -> bytes:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError(f"matrix {matrix.shape} does not match {len(ids)} ids")
    if len(set(ids)) != len(ids):
        raise ValueError("ids are not unique")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<III", VERSION, matrix.shape[1], matrix.shape[0]))
    for rid in ids:
        raw = rid.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    buf.write(matrix.tobytes())
    return buf.getvalue()


def write_atomic(path, ids: list[str], matrix: np.ndarray):
    """Serialize to a temp file and rename, so failures leave nothing behind."""
    path = Path(path)
    blob = serialize(ids, matrix)
    tmp = path.with_name(path.name + ".part")
    try:
        tmp.write_bytes(blob)
        tmp.replace(path)
    finally:
        if tmp.exists():
            tmp.unlink()
