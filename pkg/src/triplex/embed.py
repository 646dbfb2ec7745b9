"""Embedding providers, l2 normalization, and the EMB1 matrix file format."""
from __future__ import annotations

import hashlib
import json
import re
import struct
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import requests

from .reprs import ReprDoc


class EmbedError(Exception):
    pass


class NormalizationError(EmbedError):
    pass


class MatrixFormatError(EmbedError):
    pass


class MatrixCorruptionError(EmbedError):
    pass


class ProviderContractError(EmbedError):
    pass


class RemoteEmbedError(EmbedError):
    pass


def normalize_l2(vector: np.ndarray, doc_id: str | None = None) -> np.ndarray:
    """Scale to unit Euclidean norm; reject zero or non-finite vectors."""
    v = np.asarray(vector, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NormalizationError(f"non-finite vector for doc {doc_id!r}")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise NormalizationError(f"all-zero vector for doc {doc_id!r}")
    return v / norm


class EmbeddingProvider(Protocol):
    name: str
    dim: int

    def embed(self, texts: list[str]) -> list[np.ndarray]: ...


@dataclass(frozen=True)
class EmbeddingMatrix:
    doc_ids: tuple[str, ...]
    vectors: np.ndarray  # n x dim, float64, rows unit-norm
    provider_name: str
    mode: str

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __post_init__(self):
        if len(self.doc_ids) != len(set(self.doc_ids)):
            raise EmbedError("duplicate doc_ids in embedding matrix")
        if self.vectors.shape[0] != len(self.doc_ids):
            raise EmbedError("row count does not match doc_ids")

    def rows_for(self, ids: list[str]) -> "EmbeddingMatrix":
        index = {d: i for i, d in enumerate(self.doc_ids)}
        missing = [d for d in ids if d not in index]
        if missing:
            raise EmbedError(f"doc ids missing from matrix: {missing[:5]}")
        sel = np.array([index[d] for d in ids], dtype=int)
        return EmbeddingMatrix(tuple(ids), self.vectors[sel], self.provider_name, self.mode)


_TOKEN = re.compile(r"[a-z0-9]+")


class HashingProvider:
    """Deterministic feature-hashing provider (offline stand-in for real encoders).

    Token unigrams and bigrams are signed-hashed into `dim` buckets with a
    seeded blake2b hash; empty texts map to the first basis vector so that
    normalization never divides by zero.
    """

    def __init__(self, dim: int = 256, seed: int = 42):
        if dim < 2:
            raise ValueError("hash provider dim must be >= 2")
        self.dim = dim
        self.seed = seed
        self.name = f"hash-d{dim}-s{seed}"
        self._key = seed.to_bytes(8, "little", signed=False)

    def _bucket(self, feature: str) -> tuple[int, float]:
        h = hashlib.blake2b(feature.encode("utf-8"), digest_size=8, key=self._key).digest()
        v = int.from_bytes(h, "little")
        return (v >> 1) % self.dim, 1.0 if v & 1 else -1.0

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            toks = _TOKEN.findall(text.lower())
            vec = np.zeros(self.dim, dtype=np.float64)
            feats = toks + [f"{a}_{b}" for a, b in zip(toks, toks[1:])]
            for f in feats:
                b, s = self._bucket(f)
                vec[b] += s
            if not vec.any():
                vec[0] = 1.0
            out.append(vec)
        return out


def hash_provider(dim: int = 256, seed: int = 42) -> HashingProvider:
    return HashingProvider(dim=dim, seed=seed)


def embed_corpus(reprs: list[ReprDoc], provider: EmbeddingProvider, batch_size: int = 64) -> EmbeddingMatrix:
    """Embed representation texts and l2-normalize the rows."""
    modes = {r.mode for r in reprs}
    if len(modes) > 1:
        raise EmbedError(f"mixed representation modes in one batch: {sorted(m.value for m in modes)}")
    mode = next(iter(modes)).value if modes else ""
    dim = provider.dim
    rows = np.empty((len(reprs), dim), dtype=np.float64)
    for start in range(0, len(reprs), batch_size):
        batch = reprs[start : start + batch_size]
        vecs = provider.embed([r.text for r in batch])
        if len(vecs) != len(batch):
            raise ProviderContractError(
                f"provider returned {len(vecs)} vectors for {len(batch)} texts (batch at {start})"
            )
        for i, (r, v) in enumerate(zip(batch, vecs)):
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (dim,):
                raise ProviderContractError(
                    f"provider vector dim {v.shape} != advertised {dim} for doc {r.doc_id!r}"
                )
            rows[start + i] = normalize_l2(v, doc_id=r.doc_id)
    return EmbeddingMatrix(tuple(r.doc_id for r in reprs), rows, provider.name, mode)


_MAGIC = b"EMB1"


def save_matrix(matrix: EmbeddingMatrix, path) -> None:
    """EMB1 format: magic, u32 dim, u64 rows, u32-length JSON header, f32 rows."""
    header = json.dumps(
        {"provider_name": matrix.provider_name, "mode": matrix.mode, "doc_ids": list(matrix.doc_ids)},
        sort_keys=True,
    ).encode("utf-8")
    n, dim = matrix.vectors.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQ", dim, n))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(matrix.vectors.astype("<f4").tobytes())


def load_matrix(path) -> EmbeddingMatrix:
    """Load an EMB1 file; 32-bit rows are promoted to float64."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != _MAGIC:
        raise MatrixFormatError(f"{path}: missing EMB1 magic")
    if len(blob) < 4 + 12 + 4:
        raise MatrixCorruptionError(f"{path}: truncated header ({len(blob)} bytes)")
    dim, n = struct.unpack_from("<IQ", blob, 4)
    (hlen,) = struct.unpack_from("<I", blob, 16)
    off = 20
    if len(blob) < off + hlen:
        raise MatrixCorruptionError(f"{path}: truncated JSON header")
    try:
        header = json.loads(blob[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MatrixFormatError(f"{path}: bad JSON header: {e}") from e
    off += hlen
    expected = n * dim * 4
    actual = len(blob) - off
    if actual != expected:
        raise MatrixCorruptionError(f"{path}: expected {expected} row bytes, found {actual}")
    vectors = np.frombuffer(blob, dtype="<f4", count=n * dim, offset=off).reshape(n, dim).astype(np.float64)
    doc_ids = tuple(header["doc_ids"])
    if len(doc_ids) != n:
        raise MatrixCorruptionError(f"{path}: header lists {len(doc_ids)} ids for {n} rows")
    return EmbeddingMatrix(doc_ids, vectors, header.get("provider_name", ""), header.get("mode", ""))


@dataclass
class RemoteProvider:
    """Client for the /embed service protocol; vectors come back raw and are
    normalized caller-side. Transport errors retry with exponential backoff."""

    endpoint: str
    model: str
    batch_size: int = 64
    max_attempts: int = 3
    backoff: float = 0.5
    session: requests.Session = field(default_factory=requests.Session)
    _dim: int | None = field(default=None, repr=False)

    @property
    def name(self) -> str:
        return f"remote:{self.model}"

    @property
    def dim(self) -> int:
        if self._dim is None:
            models = self._request("GET", f"{self.endpoint}/models").get("models", [])
            for m in models:
                if m.get("name") == self.model:
                    self._dim = int(m["dim"])
                    break
            else:
                raise RemoteEmbedError(f"model {self.model!r} not advertised by {self.endpoint}/models")
        return self._dim

    def _request(self, method: str, url: str, payload: dict | None = None) -> dict:
        last = None
        for attempt in range(self.max_attempts):
            try:
                resp = self.session.request(method, url, json=payload, timeout=60)
                if resp.status_code >= 500 or resp.status_code == 503:
                    last = RemoteEmbedError(f"{url}: HTTP {resp.status_code}")
                elif resp.status_code != 200:
                    raise RemoteEmbedError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    return resp.json()
            except (requests.RequestException, ValueError) as e:
                last = RemoteEmbedError(f"{url}: {e}")
            if attempt + 1 < self.max_attempts:
                time.sleep(self.backoff * (2**attempt))
        raise last  # type: ignore[misc]

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        dim = self.dim
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start : start + self.batch_size]
            data = self._request("POST", f"{self.endpoint}/embed", {"model": self.model, "texts": batch})
            vectors = data.get("vectors")
            if vectors is None or len(vectors) != len(batch):
                raise ProviderContractError(
                    f"service returned {0 if vectors is None else len(vectors)} vectors "
                    f"for {len(batch)} texts (batch at {start})"
                )
            if int(data.get("dim", dim)) != dim:
                raise ProviderContractError(f"dim drift: service reported {data.get('dim')} != {dim}")
            for v in vectors:
                arr = np.asarray(v, dtype=np.float64)
                if arr.shape != (dim,):
                    raise ProviderContractError(f"vector length {arr.shape} != dim {dim}")
                out.append(arr)
        return out


def remote_provider(endpoint: str, model: str, **kwargs) -> RemoteProvider:
    return RemoteProvider(endpoint=endpoint.rstrip("/"), model=model, **kwargs)
