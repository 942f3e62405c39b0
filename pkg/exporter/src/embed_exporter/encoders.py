"""Sentence encoders behind one tiny interface: width + encode(texts).

``hash:<d>`` is a deterministic offline encoder (hashed bag of words via
blake2b) for tests and air-gapped runs. Any other name is treated as a
sentence-transformers model; with a ``pooling`` mode it is assembled from a
raw transformer plus a pooling head, otherwise loaded as-is.
"""

from __future__ import annotations

import hashlib

import numpy as np


class EncoderError(Exception):
    """Encoder could not be constructed or produced inconsistent output."""


class HashingEncoder:
    """Deterministic hashed bag-of-words; identical output on every run."""

    def __init__(self, width: int):
        if width < 8:
            raise EncoderError(f"hash encoder width must be >= 8, got {width}")
        self.width = width
        self.name = f"hash:{width}"

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.width), dtype=np.float32)
        for i, text in enumerate(texts):
            for token in text.lower().split():
                digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
                value = int.from_bytes(digest, "little")
                sign = 1.0 if value & 1 else -1.0
                out[i, (value >> 1) % self.width] += sign
        return out


class SentenceTransformerEncoder:
    """Wrapper around a pretrained sentence-transformers model."""

    def __init__(self, model_name: str, pooling: str | None = None, device: str = "cpu"):
        try:
            from sentence_transformers import SentenceTransformer, models
        except ImportError as e:
            raise EncoderError(f"sentence-transformers is not installed: {e}") from None
        try:
            if pooling is None:
                self.model = SentenceTransformer(model_name, device=device)
            else:
                transformer = models.Transformer(model_name)
                pool = models.Pooling(
                    transformer.get_word_embedding_dimension(),
                    pooling_mode=pooling,
                )
                self.model = SentenceTransformer(modules=[transformer, pool], device=device)
        except Exception as e:
            raise EncoderError(f"could not load encoder {model_name!r}: {e}") from None
        self.name = model_name
        self.width = int(self.model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        vectors = self.model.encode(texts, convert_to_numpy=True, normalize_embeddings=False)
        return np.asarray(vectors, dtype=np.float32)


DEFAULT_ENCODER = "sentence-transformers/bert-base-nli-mean-tokens"


def make_encoder(name: str, pooling: str | None = None, device: str = "cpu"):
    if name.startswith("hash:"):
        try:
            width = int(name.split(":", 1)[1])
        except ValueError:
            raise EncoderError(f"bad hash encoder spec {name!r}, expected hash:<width>") from None
        return HashingEncoder(width)
    return SentenceTransformerEncoder(name, pooling=pooling, device=device)
