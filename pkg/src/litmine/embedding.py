"""Text-embedding providers and the vector arithmetic shared by every module.

Three interchangeable providers implement the same contract (deterministic,
fixed dimension, unit-norm output): a seeded-hash provider for tests and
offline runs, a precomputed binary store, and a thin JSON-over-HTTP client.
"""

from __future__ import annotations

import hashlib
import json
import struct
import urllib.error
import urllib.request
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DIMENSION = 384

STORE_MAGIC = b"LMEB"
STORE_VERSION = 1


class EmbeddingError(Exception):
    pass


class UnknownTextError(EmbeddingError, KeyError):
    """Precomputed store has no vector for the requested text."""


class RemoteProviderError(EmbeddingError):
    """Remote endpoint failed; safe to retry."""

    retryable = True


def l2_normalize(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("zero norm")
    return (v / norm).astype(v.dtype, copy=False)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero vector")
    return float(np.dot(a, b) / (na * nb))


class EmbeddingProvider:
    """Deterministic text -> unit vector mapping of fixed dimension."""

    provider_id: str
    dimension: int

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for index, text in enumerate(texts):
            try:
                out.append(self.embed(text))
            except EmbeddingError as exc:
                raise type(exc)(f"text #{index}: {exc}") from exc
        return out


def embed_text(provider: EmbeddingProvider, text: str) -> np.ndarray:
    if not text:
        raise ValueError("empty text")
    return provider.embed(text)


def embed_batch(provider: EmbeddingProvider, texts: Sequence[str]) -> list[np.ndarray]:
    for index, text in enumerate(texts):
        if not text:
            raise ValueError(f"empty text at index {index}")
    return provider.embed_many(texts)


class HashEmbeddingProvider(EmbeddingProvider):
    """Seeded hash of the text expanded into pseudo-random Gaussian components.

    Useful for reproducible tests and offline pipelines: no model, no files,
    bit-identical output for the same (seed, text) on every platform.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, seed: int = 0) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.seed = int(seed)
        self.provider_id = f"hash:{dimension}:{self.seed}"

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("empty text")
        digest = hashlib.sha256(f"{self.seed}\x1f{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vec = rng.standard_normal(self.dimension, dtype=np.float32)
        return l2_normalize(vec)


class PrecomputedEmbeddingProvider(EmbeddingProvider):
    """Fixed text -> vector table loaded from a binary store file."""

    def __init__(self, vectors: dict[str, np.ndarray], dimension: int,
                 provider_id: str = "precomputed") -> None:
        self.dimension = dimension
        self.provider_id = provider_id
        self._vectors = vectors

    @classmethod
    def from_file(cls, path: str | Path) -> "PrecomputedEmbeddingProvider":
        dimension, vectors = read_embedding_store(path)
        return cls(vectors, dimension, provider_id=f"precomputed:{Path(path).name}")

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("empty text")
        try:
            return self._vectors[text].copy()
        except KeyError:
            raise UnknownTextError(f"unknown text: {text!r}") from None

    def __contains__(self, text: str) -> bool:
        return text in self._vectors


def write_embedding_store(
    path: str | Path,
    dimension: int,
    items: Iterable[tuple[str, np.ndarray]],
    normalize: bool = True,
) -> int:
    """Write a precomputed store; returns the number of entries written."""
    entries = []
    for key, vec in items:
        arr = np.asarray(vec, dtype=np.float32).reshape(-1)
        if arr.shape[0] != dimension:
            raise ValueError(f"vector for {key!r} has dimension {arr.shape[0]}, expected {dimension}")
        if normalize:
            arr = l2_normalize(arr)
        entries.append((key, arr))
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<III", STORE_VERSION, dimension, len(entries)))
        for key, arr in entries:
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<I", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(arr.astype("<f4").tobytes())
    return len(entries)


def read_embedding_store(path: str | Path) -> tuple[int, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != STORE_MAGIC:
            raise EmbeddingError(f"bad magic in embedding store {path}")
        header = fh.read(12)
        if len(header) != 12:
            raise EmbeddingError(f"truncated embedding store {path}")
        version, dimension, count = struct.unpack("<III", header)
        if version != STORE_VERSION:
            raise EmbeddingError(f"unsupported embedding store version {version}")
        vectors: dict[str, np.ndarray] = {}
        for _ in range(count):
            raw_len = fh.read(4)
            if len(raw_len) != 4:
                raise EmbeddingError(f"truncated embedding store {path}")
            (key_len,) = struct.unpack("<I", raw_len)
            key_bytes = fh.read(key_len)
            vec_bytes = fh.read(dimension * 4)
            if len(key_bytes) != key_len or len(vec_bytes) != dimension * 4:
                raise EmbeddingError(f"truncated embedding store {path}")
            vectors[key_bytes.decode("utf-8")] = np.frombuffer(vec_bytes, dtype="<f4").copy()
    return dimension, vectors


class RemoteEmbeddingProvider(EmbeddingProvider):
    """JSON-over-HTTP client: POST {url}/embed {"texts": [...]} -> {"vectors": [[...]]}.

    The model behind the endpoint is server-side configuration; this client
    only enforces the wire contract, the dimension, and unit norms.
    """

    def __init__(self, url: str, dimension: int = DEFAULT_DIMENSION,
                 batch_size: int = 64, timeout: float = 30.0) -> None:
        self.url = url.rstrip("/")
        self.dimension = dimension
        self.batch_size = max(1, batch_size)
        self.timeout = timeout
        self.provider_id = f"remote:{self.url}:{dimension}"

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            out.extend(self._post(texts[start:start + self.batch_size]))
        return out

    def _post(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            return []
        payload = json.dumps({"texts": list(texts)}).encode("utf-8")
        request = urllib.request.Request(
            self.url + "/embed",
            data=payload,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                body = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise RemoteProviderError(f"embedding endpoint failed: {exc}") from exc
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise RemoteProviderError("embedding endpoint returned a malformed payload")
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dimension,):
                raise RemoteProviderError(
                    f"embedding endpoint returned dimension {arr.shape}, expected {self.dimension}")
            out.append(l2_normalize(arr))
        return out
