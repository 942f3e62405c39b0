"""Dataset ingestion, stratified splitting, feature hashing, embedding cache.

The embedding cache is the binary interchange format shared with the offline
exporter: a fixed header (magic "SLCE", version, width, count), a length-
prefixed id index, then the row-major float32 little-endian matrix. Readers
validate magic, version, and exact file length.
"""

from __future__ import annotations

import csv
import io
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .errors import CacheFormatError, ConfigError, DataError, MissingIdError, ParameterError

CACHE_MAGIC = b"SLCE"
CACHE_VERSION = 1

# fixed 64-bit FNV-1a parameters plus a package-wide seed constant, so hashed
# features are identical across runs, platforms and processes
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_HASH_SEED = b"slicemoa-v1"
_MASK64 = (1 << 64) - 1


@dataclass
class TextDataset:
    """Aligned ids, texts, and integer labels plus the label vocabulary."""

    ids: list[str]
    texts: list[str]
    labels: np.ndarray
    label_vocab: list[str]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not (len(self.ids) == len(self.texts) == len(self.labels)):
            raise DataError("dataset fields have mismatched lengths")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("dataset ids are not unique")
        if len(self.labels) and self.labels.max() >= len(self.label_vocab):
            raise DataError("label index outside the vocabulary")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def num_classes(self) -> int:
        return len(self.label_vocab)

    def subset(self, indices) -> "TextDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return TextDataset(
            ids=[self.ids[i] for i in idx],
            texts=[self.texts[i] for i in idx],
            labels=self.labels[idx],
            label_vocab=self.label_vocab,
        )


def load_dataset(
    path,
    fmt: str,
    text_col: str,
    label_col: str,
    id_col: str | None = None,
    lowercase: bool = False,
    label_vocab: list[str] | None = None,
) -> TextDataset:
    """Load a TSV/CSV/JSONL dataset.

    The label vocabulary is built in first-appearance order unless one is
    supplied (evaluation time), in which case unknown labels are an error.
    Row ids come from ``id_col`` when given, else are derived from the row
    number.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    rows: list[tuple[str, str, str]] = []
    if fmt in ("tsv", "csv"):
        delim = "\t" if fmt == "tsv" else ","
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter=delim)
            for lineno, row in enumerate(reader, start=2):
                try:
                    text, label = row[text_col], row[label_col]
                    rid = row[id_col] if id_col else f"r{lineno - 2:06d}"
                except KeyError as e:
                    raise DataError(f"{path}:{lineno}: missing column {e}") from None
                if text is None or label is None:
                    raise DataError(f"{path}:{lineno}: short row")
                rows.append((rid, text, label))
    elif fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    text, label = obj[text_col], str(obj[label_col])
                    rid = str(obj[id_col]) if id_col else f"r{lineno - 1:06d}"
                except (json.JSONDecodeError, KeyError) as e:
                    raise DataError(f"{path}:{lineno}: {e}") from None
                rows.append((rid, text, label))
    else:
        raise ConfigError(f"dataset.format: unknown format {fmt!r}")

    vocab = list(label_vocab) if label_vocab is not None else []
    index = {name: i for i, name in enumerate(vocab)}
    frozen = label_vocab is not None
    ids, texts, labels = [], [], []
    for rid, text, label in rows:
        if label not in index:
            if frozen:
                raise DataError(f"unknown label {label!r} not in the persisted vocabulary")
            index[label] = len(vocab)
            vocab.append(label)
        ids.append(rid)
        texts.append(text.lower() if lowercase else text)
        labels.append(index[label])
    if len(set(ids)) != len(ids):
        seen, dup = set(), None
        for rid in ids:
            if rid in seen:
                dup = rid
                break
            seen.add(rid)
        raise DataError(f"duplicate id {dup!r} in {path}")
    return TextDataset(ids=ids, texts=texts, labels=np.array(labels, dtype=np.int64), label_vocab=vocab)


def write_dataset(ds: TextDataset, path, fmt: str = "tsv"):
    """Write a dataset back out (round-trip counterpart of load_dataset)."""
    path = Path(path)
    if fmt not in ("tsv", "csv"):
        raise ConfigError(f"write_dataset: unsupported format {fmt!r}")
    delim = "\t" if fmt == "tsv" else ","
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delim)
        writer.writerow(["id", "text", "label"])
        for rid, text, label in zip(ds.ids, ds.texts, ds.labels):
            writer.writerow([rid, text, ds.label_vocab[label]])


def write_label_vocab(path, vocab: list[str]):
    Path(path).write_text("".join(f"{name}\n" for name in vocab), encoding="utf-8")


def read_label_vocab(path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


# -- stratified splitting -----------------------------------------------------


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation summing to ``total`` with per-entry error < 1."""
    floors = np.floor(quotas).astype(np.int64)
    remainder = int(total - floors.sum())
    if remainder > 0:
        order = np.argsort(-(quotas - floors), kind="stable")
        floors[order[:remainder]] += 1
    return floors


def stratified_split(ds: TextDataset, fractions=None, counts=None, seed: int = 0, strata=None):
    """Split into (train, val, test) with label proportions preserved.

    Each split's per-class allocation follows the largest-remainder rule, so
    class proportions stay within one sample of the global ones. Splits are
    disjoint and deterministic for a fixed seed. ``strata`` may supply a
    finer grouping than the labels (one int per sample); proportions are then
    preserved per stratum.
    """
    if (fractions is None) == (counts is None):
        raise ConfigError("split: exactly one of fractions or counts is required")
    n = len(ds)
    if fractions is not None:
        if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
            raise ConfigError("split.fractions: need three non-negative values summing to 1")
        counts = _largest_remainder(np.array([f * n for f in fractions]), n)
    counts = [int(c) for c in counts]
    if len(counts) != 3 or min(counts) < 0 or sum(counts) > n:
        raise ConfigError(f"split.counts: need three counts summing to at most {n}")

    groups = ds.labels if strata is None else np.asarray(strata, dtype=np.int64)
    if groups.shape != (n,):
        raise ConfigError(f"split.strata: expected {n} entries, got shape {groups.shape}")
    group_ids = sorted(set(int(g) for g in groups))

    generator = rng_mod.stream(seed, "split")
    pools: dict[int, list[int]] = {}
    for g in group_ids:
        idx = np.flatnonzero(groups == g)
        pools[g] = list(generator.permutation(idx))
        if 0 < len(idx) < 3:
            name = ds.label_vocab[g] if strata is None else f"stratum {g}"
            warnings.warn(
                f"{name!r} has only {len(idx)} samples; "
                "allocation across three splits is best effort"
            )

    splits = []
    for want in counts:
        remaining = np.array([len(pools[g]) for g in group_ids], dtype=np.float64)
        m = remaining.sum()
        if want > m:
            raise ConfigError(f"split.counts: requested {want} but only {int(m)} samples remain")
        alloc = _largest_remainder(remaining * (want / m) if m else remaining, want)
        taken: list[int] = []
        for j, g in enumerate(group_ids):
            take = min(int(alloc[j]), len(pools[g]))
            taken.extend(pools[g][:take])
            pools[g] = pools[g][take:]
        splits.append(ds.subset(sorted(taken)))
    return tuple(splits)


# -- hashing featurizer ----------------------------------------------------------


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in _HASH_SEED + data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def hashing_featurize(text: str, d: int) -> np.ndarray:
    """Signed feature hashing of lowercase unigrams+bigrams, L2-normalized.

    Deterministic across platforms and runs (fixed 64-bit FNV-1a with a fixed
    seed constant). Empty text maps to the zero vector, left unnormalized.
    """
    if d < 16:
        raise ParameterError(f"hashing featurizer needs d >= 16, got {d}")
    vec = np.zeros(d, dtype=np.float64)
    tokens = text.lower().split()
    if not tokens:
        return vec
    grams = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    for gram in grams:
        h = _fnv1a(gram.encode("utf-8"))
        sign = 1.0 if h & 1 else -1.0
        vec[(h >> 1) % d] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def featurize_all(texts, d: int) -> np.ndarray:
    return np.stack([hashing_featurize(t, d) for t in texts]) if len(texts) else np.zeros((0, d))


# -- embedding cache --------------------------------------------------------------


@dataclass
class EmbeddingCache:
    """Id-indexed float32 embedding matrix backed by the binary format."""

    ids: list[str]
    vectors: np.ndarray  # [count, d] float32
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        self._index = {rid: i for i, rid in enumerate(self.ids)}

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def lookup(self, ids, dtype=np.float64) -> np.ndarray:
        """Rows for the requested ids, promoted to the training precision."""
        rows = []
        for rid in ids:
            if rid not in self._index:
                raise MissingIdError(f"id {rid!r} not present in the embedding cache")
            rows.append(self._index[rid])
        return self.vectors[np.array(rows, dtype=np.int64)].astype(dtype)


def write_cache(path, ids: list[str], matrix: np.ndarray):
    """Write the cache atomically (temp file + rename)."""
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise DataError(f"cache write: matrix {matrix.shape} does not match {len(ids)} ids")
    if len(set(ids)) != len(ids):
        raise DataError("cache write: ids are not unique")
    buf = io.BytesIO()
    buf.write(CACHE_MAGIC)
    buf.write(struct.pack("<III", CACHE_VERSION, matrix.shape[1], matrix.shape[0]))
    for rid in ids:
        raw = rid.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    buf.write(matrix.astype("<f4").tobytes())
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(path)


def read_cache(path) -> EmbeddingCache:
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding cache not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 16 or blob[:4] != CACHE_MAGIC:
        raise CacheFormatError(f"{path}: bad magic, not an embedding cache")
    version, d, count = struct.unpack_from("<III", blob, 4)
    if version != CACHE_VERSION:
        raise CacheFormatError(f"{path}: unsupported cache version {version}")
    offset = 16
    ids = []
    for _ in range(count):
        if offset + 4 > len(blob):
            raise CacheFormatError(f"{path}: truncated id index")
        (ln,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + ln > len(blob):
            raise CacheFormatError(f"{path}: truncated id index")
        ids.append(blob[offset : offset + ln].decode("utf-8"))
        offset += ln
    expected = offset + 4 * d * count
    if len(blob) != expected:
        raise CacheFormatError(f"{path}: length {len(blob)} != expected {expected}")
    matrix = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(count, d)
    return EmbeddingCache(ids=ids, vectors=matrix.copy())
