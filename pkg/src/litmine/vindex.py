"""Inverted-file product-quantization index for approximate nearest neighbors.

Two-level scheme: a coarse K-means codebook partitions vectors into inverted
lists; a product quantizer codes each vector's residual (vector minus its
coarse centroid) as one byte per subspace.  Queries probe the tau nearest
lists and rank entries by asymmetric distance computed from per-subspace
lookup tables.  A linear-scan ``exact_search`` serves as the oracle.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import kmeans_array

INDEX_MAGIC = b"LMIX"
INDEX_VERSION = 1
RAW_MAGIC = b"LMRV"

DEFAULT_B = 8
DEFAULT_KSUB = 256
DEFAULT_TAU = 8

TRAIN_MAX_ITER = 60
TRAIN_RESTARTS = 1


class IndexFileError(Exception):
    """Malformed or truncated index file."""


@dataclass
class IndexParams:
    p: int
    nlist: int
    b: int = DEFAULT_B
    ksub: int = DEFAULT_KSUB
    tau: int = DEFAULT_TAU
    seed: int = 0

    def validate(self) -> None:
        if self.p < 1 or self.nlist < 1:
            raise ValueError("p and nlist must be positive")
        if self.b < 1 or self.p % self.b != 0:
            raise ValueError(f"b={self.b} must divide p={self.p}")
        if not 1 <= self.ksub <= 256:
            raise ValueError("ksub must be in [1, 256] for one-byte codes")
        if not 1 <= self.tau <= self.nlist:
            raise ValueError("tau must be in [1, nlist]")

    @property
    def dsub(self) -> int:
        return self.p // self.b


def default_nlist(n: int) -> int:
    """Codebook size around sqrt(N), clamped to [1, N]."""
    return max(1, min(n, round(n ** 0.5)))


@dataclass
class CoarseQuantizer:
    centroids: np.ndarray  # (nlist, p) float32

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]

    def nearest(self, vector: np.ndarray) -> int:
        diff = self.centroids.astype(np.float64) - np.asarray(vector, dtype=np.float64)
        return int(np.argmin(np.einsum("kp,kp->k", diff, diff)))


@dataclass
class ProductQuantizer:
    codebooks: np.ndarray  # (b, ksub, dsub) float32

    @property
    def b(self) -> int:
        return self.codebooks.shape[0]

    @property
    def ksub(self) -> int:
        return self.codebooks.shape[1]

    def encode_residual(self, residual: np.ndarray) -> np.ndarray:
        sub = np.asarray(residual, dtype=np.float64).reshape(self.b, -1)
        books = self.codebooks.astype(np.float64)
        diff = books - sub[:, None, :]
        dists = np.einsum("bkd,bkd->bk", diff, diff)
        return np.argmin(dists, axis=1).astype(np.uint8)

    def reconstruct(self, codes: np.ndarray) -> np.ndarray:
        return self.codebooks[np.arange(self.b), codes].reshape(-1).astype(np.float64)


def _derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([abs(int(seed)), stream]).generate_state(1, np.uint64)[0] >> 1)


def _train_codebook(points: np.ndarray, k: int, seed: int, max_iter: int,
                    restarts: int, init_centroids: np.ndarray | None = None) -> np.ndarray:
    """K-means codebook of exactly k rows; duplicates pad degenerate inputs."""
    distinct = np.unique(points, axis=0).shape[0]
    effective = min(k, distinct)
    if init_centroids is not None:
        result = kmeans_array(points, effective, max_iter=max_iter, tol=1e-6,
                              init_centroids=init_centroids[:effective])
    else:
        result = kmeans_array(points, effective, seed=seed, max_iter=max_iter,
                              tol=1e-6, restarts=restarts)
    centroids = result.centroids
    if effective < k:
        pad = centroids[np.arange(k - effective) % effective]
        centroids = np.vstack([centroids, pad])
    return centroids


def train_coarse(
    vectors: np.ndarray,
    nlist: int | None = None,
    seed: int = 0,
    max_iter: int = TRAIN_MAX_ITER,
    restarts: int = TRAIN_RESTARTS,
) -> CoarseQuantizer:
    """First-level codebook over the training vectors (nlist ~ sqrt(N) by default)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ValueError("vectors must be a nonempty 2-D array")
    if nlist is None:
        nlist = default_nlist(vectors.shape[0])
    if nlist > vectors.shape[0]:
        raise ValueError(f"nlist={nlist} exceeds training size {vectors.shape[0]}")
    centroids = _train_codebook(vectors, nlist, _derive_seed(seed, 0), max_iter, restarts)
    return CoarseQuantizer(centroids=centroids.astype(np.float32))


def train_pq(
    residuals: np.ndarray,
    b: int,
    ksub: int,
    seed: int = 0,
    max_iter: int = TRAIN_MAX_ITER,
    restarts: int = TRAIN_RESTARTS,
    warm_start: ProductQuantizer | None = None,
) -> ProductQuantizer:
    """Independent per-subspace codebooks over residual slices.

    ``warm_start`` seeds each codebook with a smaller trained one padded by
    farthest-point picks, so reconstruction error cannot regress as ksub grows.
    """
    residuals = np.asarray(residuals, dtype=np.float64)
    if residuals.ndim != 2 or residuals.shape[0] == 0:
        raise ValueError("residuals must be a nonempty 2-D array")
    p = residuals.shape[1]
    if b < 1 or p % b != 0:
        raise ValueError(f"b={b} must divide p={p}")
    if not 1 <= ksub <= 256:
        raise ValueError("ksub must be in [1, 256]")
    if ksub > residuals.shape[0]:
        raise ValueError(f"ksub={ksub} exceeds number of residuals {residuals.shape[0]}")
    dsub = p // b
    codebooks = np.empty((b, ksub, dsub), dtype=np.float32)
    for j in range(b):
        slice_j = residuals[:, j * dsub:(j + 1) * dsub]
        init = None
        if warm_start is not None:
            init = _warm_init(slice_j, warm_start.codebooks[j].astype(np.float64), ksub)
        codebooks[j] = _train_codebook(slice_j, ksub, _derive_seed(seed, j + 1), max_iter,
                                       restarts, init_centroids=init)
    return ProductQuantizer(codebooks=codebooks)


def _warm_init(points: np.ndarray, base: np.ndarray, k: int) -> np.ndarray:
    if base.shape[0] >= k:
        return base[:k].copy()
    chosen = base.copy()
    diff = points[:, None, :] - chosen[None, :, :]
    min_d2 = np.einsum("nkd,nkd->nk", diff, diff).min(axis=1)
    while chosen.shape[0] < k:
        pick = int(np.argmax(min_d2))
        chosen = np.vstack([chosen, points[pick]])
        d2 = np.einsum("nd,nd->n", points - points[pick], points - points[pick])
        min_d2 = np.minimum(min_d2, d2)
    return chosen


@dataclass
class SearchHit:
    doc_id: int
    estimated_distance: float


@dataclass
class IvfPqIndex:
    params: IndexParams
    coarse: CoarseQuantizer
    pq: ProductQuantizer
    retain_raw: bool = False
    count: int = 0
    sealed: bool = False
    _list_ids: list[list[int]] = field(default_factory=list)
    _list_codes: list[list[np.ndarray]] = field(default_factory=list)
    _sealed_ids: list[np.ndarray] = field(default_factory=list)
    _sealed_codes: list[np.ndarray] = field(default_factory=list)
    _known_ids: set[int] = field(default_factory=set)
    raw_ids: list[int] = field(default_factory=list)
    raw_vectors: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.params.validate()
        if not self._list_ids:
            self._list_ids = [[] for _ in range(self.params.nlist)]
            self._list_codes = [[] for _ in range(self.params.nlist)]

    def list_lengths(self) -> list[int]:
        if self.sealed:
            return [len(ids) for ids in self._sealed_ids]
        return [len(ids) for ids in self._list_ids]


def train_index(
    vectors: np.ndarray,
    params: IndexParams,
    retain_raw: bool = False,
) -> IvfPqIndex:
    """Train coarse and fine quantizers and return an empty, unsealed index."""
    params.validate()
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape[1] != params.p:
        raise ValueError(f"training vectors have dimension {vectors.shape[1]}, expected {params.p}")
    coarse = train_coarse(vectors, params.nlist, seed=params.seed)
    centroids = coarse.centroids.astype(np.float64)
    x2 = np.einsum("np,np->n", vectors, vectors)
    c2 = np.einsum("kp,kp->k", centroids, centroids)
    labels = np.argmin(x2[:, None] + c2[None, :] - 2.0 * (vectors @ centroids.T), axis=1)
    residuals = vectors - centroids[labels]
    pq = train_pq(residuals, params.b, params.ksub, seed=params.seed)
    return IvfPqIndex(params=params, coarse=coarse, pq=pq, retain_raw=retain_raw)


def encode(index: IvfPqIndex, vector: np.ndarray) -> tuple[int, np.ndarray]:
    """Coarse list id and per-subspace residual codes for one vector."""
    vec = np.asarray(vector, dtype=np.float64)
    if vec.shape != (index.params.p,):
        raise ValueError(f"dimension mismatch: {vec.shape} vs ({index.params.p},)")
    list_id = index.coarse.nearest(vec)
    residual = vec - index.coarse.centroids[list_id].astype(np.float64)
    return list_id, index.pq.encode_residual(residual)


def add(index: IvfPqIndex, doc_id: int, vector: np.ndarray) -> None:
    if index.sealed:
        raise ValueError("index is sealed")
    doc_id = int(doc_id)
    if doc_id in index._known_ids:
        raise ValueError(f"duplicate id: {doc_id}")
    index._known_ids.add(doc_id)
    list_id, codes = encode(index, vector)
    index._list_ids[list_id].append(doc_id)
    index._list_codes[list_id].append(codes)
    if index.retain_raw:
        index.raw_ids.append(doc_id)
        index.raw_vectors.append(np.asarray(vector, dtype=np.float32).copy())
    index.count += 1


def seal(index: IvfPqIndex) -> IvfPqIndex:
    """Freeze the index for searching; no further adds."""
    if index.sealed:
        return index
    index._sealed_ids = [np.asarray(ids, dtype=np.int64) for ids in index._list_ids]
    index._sealed_codes = [
        np.asarray(codes, dtype=np.uint8).reshape(len(codes), index.params.b)
        for codes in index._list_codes
    ]
    index._list_ids = [[] for _ in range(index.params.nlist)]
    index._list_codes = [[] for _ in range(index.params.nlist)]
    index.sealed = True
    return index


def _probe_order(index: IvfPqIndex, query: np.ndarray, tau: int) -> np.ndarray:
    centroids = index.coarse.centroids.astype(np.float64)
    diff = centroids - query
    dists = np.einsum("kp,kp->k", diff, diff)
    order = np.lexsort((np.arange(centroids.shape[0]), dists))
    return order[:tau]


def search(
    index: IvfPqIndex,
    query: np.ndarray,
    r: int,
    tau: int | None = None,
) -> list[SearchHit]:
    """ADC search over the tau nearest inverted lists; at most r hits.

    Entry distances are sums of per-subspace lookup-table values between the
    query residual (per probed centroid) and each entry's codewords; ties
    break by ascending id.
    """
    if not index.sealed:
        raise ValueError("index is not sealed")
    if r < 1:
        raise ValueError("r must be >= 1")
    tau = index.params.tau if tau is None else tau
    if not 1 <= tau <= index.params.nlist:
        raise ValueError("tau must be in [1, nlist]")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (index.params.p,):
        raise ValueError(f"dimension mismatch: {query.shape} vs ({index.params.p},)")

    b, dsub = index.params.b, index.params.dsub
    books = index.pq.codebooks.astype(np.float64)
    all_ids: list[np.ndarray] = []
    all_dists: list[np.ndarray] = []
    for list_id in _probe_order(index, query, tau):
        ids = index._sealed_ids[list_id]
        if ids.shape[0] == 0:
            continue
        residual = query - index.coarse.centroids[list_id].astype(np.float64)
        sub = residual.reshape(b, dsub)
        table = np.einsum("bkd,bkd->bk", books - sub[:, None, :], books - sub[:, None, :])
        codes = index._sealed_codes[list_id]
        dists = table[np.arange(b)[None, :], codes].sum(axis=1)
        all_ids.append(ids)
        all_dists.append(dists)
    if not all_ids:
        return []
    ids = np.concatenate(all_ids)
    dists = np.concatenate(all_dists)
    order = np.lexsort((ids, dists))[:r]
    return [SearchHit(int(ids[i]), float(dists[i])) for i in order]


def exact_search(
    ids: Sequence[int] | np.ndarray,
    vectors: np.ndarray,
    query: np.ndarray,
    r: int,
) -> list[SearchHit]:
    """True squared-Euclidean nearest neighbors by linear scan (the oracle)."""
    ids = np.asarray(ids, dtype=np.int64)
    vectors = np.asarray(vectors, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != ids.shape[0]:
        raise ValueError("ids and vectors must align")
    if query.shape != (vectors.shape[1],):
        raise ValueError("dimension mismatch")
    if r < 1:
        raise ValueError("r must be >= 1")
    diff = vectors - query
    dists = np.einsum("np,np->n", diff, diff)
    order = np.lexsort((ids, dists))[:r]
    return [SearchHit(int(ids[i]), float(dists[i])) for i in order]


def save_index(index: IvfPqIndex, path: str | Path) -> None:
    """Write the sealed index: header, codebooks, then per-list entries."""
    if not index.sealed:
        raise ValueError("seal the index before saving")
    params = index.params
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<IIIIII", INDEX_VERSION, params.p, params.nlist,
                             params.b, params.ksub, params.tau))
        fh.write(struct.pack("<QQ", params.seed, index.count))
        fh.write(np.ascontiguousarray(index.coarse.centroids, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(index.pq.codebooks, dtype="<f4").tobytes())
        for ids, codes in zip(index._sealed_ids, index._sealed_codes):
            fh.write(struct.pack("<Q", ids.shape[0]))
            for doc_id, row in zip(ids, codes):
                fh.write(struct.pack("<Q", int(doc_id)))
                fh.write(row.tobytes())


def _read_exact(fh, size: int, path) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise IndexFileError(f"truncated index file {path}")
    return data


def load_index(path: str | Path) -> IvfPqIndex:
    with open(path, "rb") as fh:
        if fh.read(4) != INDEX_MAGIC:
            raise IndexFileError(f"bad magic in index file {path}")
        version, p, nlist, b, ksub, tau = struct.unpack("<IIIIII", _read_exact(fh, 24, path))
        if version != INDEX_VERSION:
            raise IndexFileError(f"unsupported index version {version}")
        seed, count = struct.unpack("<QQ", _read_exact(fh, 16, path))
        params = IndexParams(p=p, nlist=nlist, b=b, ksub=ksub, tau=tau, seed=seed)
        params.validate()
        coarse = CoarseQuantizer(centroids=np.frombuffer(
            _read_exact(fh, nlist * p * 4, path), dtype="<f4").reshape(nlist, p).copy())
        pq = ProductQuantizer(codebooks=np.frombuffer(
            _read_exact(fh, b * ksub * params.dsub * 4, path),
            dtype="<f4").reshape(b, ksub, params.dsub).copy())
        index = IvfPqIndex(params=params, coarse=coarse, pq=pq)
        total = 0
        for list_id in range(nlist):
            (length,) = struct.unpack("<Q", _read_exact(fh, 8, path))
            ids = np.empty(length, dtype=np.int64)
            codes = np.empty((length, b), dtype=np.uint8)
            for i in range(length):
                (doc_id,) = struct.unpack("<Q", _read_exact(fh, 8, path))
                ids[i] = doc_id
                codes[i] = np.frombuffer(_read_exact(fh, b, path), dtype=np.uint8)
            index._sealed_ids.append(ids)
            index._sealed_codes.append(codes)
            total += length
        if total != count:
            raise IndexFileError(f"index file {path} count mismatch: {total} != {count}")
        if fh.read(1):
            raise IndexFileError(f"trailing bytes in index file {path}")
    index.count = count
    index.sealed = True
    return index


def save_raw(index: IvfPqIndex, path: str | Path) -> None:
    """Sidecar of raw vectors for the exact oracle / exact re-ranking."""
    if not index.retain_raw:
        raise ValueError("index was built without retain_raw")
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<IIQ", 1, index.params.p, len(index.raw_ids)))
        for doc_id, vec in zip(index.raw_ids, index.raw_vectors):
            fh.write(struct.pack("<Q", int(doc_id)))
            fh.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())


def load_raw(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != RAW_MAGIC:
            raise IndexFileError(f"bad magic in raw sidecar {path}")
        version, p, count = struct.unpack("<IIQ", _read_exact(fh, 16, path))
        if version != 1:
            raise IndexFileError(f"unsupported raw sidecar version {version}")
        ids = np.empty(count, dtype=np.int64)
        vectors = np.empty((count, p), dtype=np.float32)
        for i in range(count):
            (doc_id,) = struct.unpack("<Q", _read_exact(fh, 8, path))
            ids[i] = doc_id
            vectors[i] = np.frombuffer(_read_exact(fh, p * 4, path), dtype="<f4")
    return ids, vectors
