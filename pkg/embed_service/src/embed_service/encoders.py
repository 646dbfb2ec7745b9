"""Encoder backends: real sentence-transformer checkpoints plus a
deterministic hashing stub for offline development and tests."""
from __future__ import annotations

import hashlib
import logging
import threading

import numpy as np

from .config import ModelSpec

log = logging.getLogger(__name__)


class EncoderError(Exception):
    pass


class HashEncoder:
    """Signed feature hashing over whitespace tokens. Deterministic, instant to
    load, and shaped exactly like a transformer backend: fixed dim, token
    truncation at max_tokens, unnormalized outputs."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self._key = spec.seed.to_bytes(8, "little")

    def ready(self) -> bool:
        return True

    @property
    def resolved_id(self) -> str:
        return f"hash:{self.spec.dim}:{self.spec.seed}"

    def encode(self, texts: list[str]) -> np.ndarray:
        dim = self.spec.dim
        out = np.zeros((len(texts), dim), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = text.lower().split()[: self.spec.max_tokens]
            for tok in tokens:
                digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=8, key=self._key).digest()
                v = int.from_bytes(digest, "little")
                out[i, (v >> 1) % dim] += 1.0 if v & 1 else -1.0
        return out


class SentenceTransformerEncoder:
    """Wraps a sentence-transformers checkpoint; weights load in a background
    thread so the service can answer 503 instead of blocking the first caller.

    Mean pooling is what sentence-transformers applies by default for
    encoder-only checkpoints without a sentence head (SciBERT included).
    Inference is forced deterministic: eval mode, no grad, one torch thread.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self._model = None
        self._error: Exception | None = None
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self._load, daemon=True)
        self._thread.start()

    def _load(self):
        try:
            import torch
            from sentence_transformers import SentenceTransformer

            torch.set_num_threads(1)
            model = SentenceTransformer(self.spec.model_id, device="cpu")
            model.eval()
            model.max_seq_length = min(model.max_seq_length, self.spec.max_tokens)
            got = model.get_sentence_embedding_dimension()
            if got != self.spec.dim:
                raise EncoderError(f"{self.spec.model_id}: checkpoint dim {got} != configured {self.spec.dim}")
            with self._lock:
                self._model = model
        except Exception as e:  # noqa: BLE001 - surfaced as 503/500 to callers
            log.exception("failed to load %s", self.spec.model_id)
            with self._lock:
                self._error = e

    def ready(self) -> bool:
        with self._lock:
            if self._error is not None:
                raise EncoderError(str(self._error))
            return self._model is not None

    @property
    def resolved_id(self) -> str:
        return self.spec.model_id

    def encode(self, texts: list[str]) -> np.ndarray:
        import torch

        with self._lock:
            model = self._model
        if model is None:
            raise EncoderError(f"{self.spec.name} still loading")
        with torch.no_grad():
            vectors = model.encode(texts, convert_to_numpy=True, normalize_embeddings=False, batch_size=32)
        return np.asarray(vectors, dtype=np.float64).reshape(len(texts), self.spec.dim)


def build_encoder(spec: ModelSpec):
    if spec.kind == "hash":
        return HashEncoder(spec)
    return SentenceTransformerEncoder(spec)
