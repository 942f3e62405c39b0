"""Batch-encode a dataset's texts and write the embedding cache.

Row ids follow the training side's convention: the ``id_col`` values when
given, else ``r%06d`` by row order, so a cache exported from the same file
resolves every id. The export is all-or-nothing: any failure (unreadable
row, encoder error, dimension drift mid-run) aborts without leaving a
partial cache behind.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cache import write_atomic
from .encoders import DEFAULT_ENCODER, make_encoder


class ExportError(Exception):
    """Dataset problem or mid-export inconsistency."""


@dataclass
class ExportJob:
    dataset: str
    out: str
    format: str = "tsv"
    text_col: str = "text"
    id_col: str | None = None
    encoder: str = DEFAULT_ENCODER
    pooling: str | None = None
    batch_size: int = 32
    normalize: bool = False
    device: str = "cpu"


@dataclass
class ExportResult:
    path: Path
    count: int
    width: int


def read_texts(path, fmt: str, text_col: str, id_col: str | None):
    path = Path(path)
    if not path.exists():
        raise ExportError(f"dataset file not found: {path}")
    ids: list[str] = []
    texts: list[str] = []
    if fmt in ("tsv", "csv"):
        delim = "\t" if fmt == "tsv" else ","
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter=delim)
            for row_idx, row in enumerate(reader):
                if text_col not in row or row[text_col] is None:
                    raise ExportError(f"{path}: row {row_idx + 2} has no {text_col!r} column")
                ids.append(row[id_col] if id_col else f"r{row_idx:06d}")
                texts.append(row[text_col])
    elif fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            row_idx = 0
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    text = obj[text_col]
                except (json.JSONDecodeError, KeyError) as e:
                    raise ExportError(f"{path}:{lineno}: {e}") from None
                ids.append(str(obj[id_col]) if id_col else f"r{row_idx:06d}")
                texts.append(text)
                row_idx += 1
    else:
        raise ExportError(f"unknown dataset format {fmt!r}")
    if len(set(ids)) != len(ids):
        raise ExportError(f"{path}: duplicate ids")
    return ids, texts


def run_export(job: ExportJob) -> ExportResult:
    ids, texts = read_texts(job.dataset, job.format, job.text_col, job.id_col)
    if not ids:
        raise ExportError(f"{job.dataset}: no rows to export")
    if job.batch_size < 1:
        raise ExportError(f"batch_size must be positive, got {job.batch_size}")
    encoder = make_encoder(job.encoder, pooling=job.pooling, device=job.device)

    blocks = []
    for start in range(0, len(texts), job.batch_size):
        batch = encoder.encode(texts[start : start + job.batch_size])
        batch = np.asarray(batch, dtype=np.float32)
        if batch.ndim != 2 or batch.shape[1] != encoder.width:
            raise ExportError(
                f"encoder width drifted: batch at row {start} has shape {batch.shape}, "
                f"expected width {encoder.width}"
            )
        blocks.append(batch)
    matrix = np.vstack(blocks)
    if job.normalize:
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        np.divide(matrix, norms, out=matrix, where=norms > 0)

    write_atomic(job.out, ids, matrix)
    return ExportResult(path=Path(job.out), count=len(ids), width=encoder.width)
