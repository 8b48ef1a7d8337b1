"""K-means topic clustering over keyword embeddings, plus derived views.

Lloyd iterations with seeded restarts, deterministic tie-breaking (lowest
cluster id / lowest point index), and farthest-point repair of empty
clusters.  Derived views: per-cluster word-cloud weights, paper -> cluster
tagging, and a 2-D principal-component projection of the centroids.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import PaperRecord

DEFAULT_K = 30
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6
DEFAULT_RESTARTS = 10

# Direct (x - c)^2 distances preserve exact ties (e.g. midpoints) but build an
# n*k*p intermediate; above this size we switch to the expanded dot form.
_DIRECT_DISTANCE_LIMIT = 1 << 22


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    n, p = points.shape
    k = centroids.shape[0]
    if n * k * p <= _DIRECT_DISTANCE_LIMIT:
        diff = points[:, None, :] - centroids[None, :, :]
        return np.einsum("nkp,nkp->nk", diff, diff)
    x2 = np.einsum("np,np->n", points, points)
    c2 = np.einsum("kp,kp->k", centroids, centroids)
    d2 = x2[:, None] + c2[None, :] - 2.0 * (points @ centroids.T)
    return np.maximum(d2, 0.0)


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    wcss_history: list[float]
    iterations: int

    @property
    def wcss(self) -> float:
        return self.wcss_history[-1]


def _distinct_count(points: np.ndarray) -> int:
    return np.unique(points, axis=0).shape[0]


def _init_random(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen: list[int] = []
    seen: set[bytes] = set()
    for index in rng.permutation(points.shape[0]):
        key = points[index].tobytes()
        if key in seen:
            continue
        seen.add(key)
        chosen.append(int(index))
        if len(chosen) == k:
            break
    return points[chosen].copy()


def _init_farthest(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    first = int(rng.integers(points.shape[0]))
    chosen = [first]
    min_d2 = _sq_dists(points, points[[first]])[:, 0]
    while len(chosen) < k:
        next_index = int(np.argmax(min_d2))
        chosen.append(next_index)
        min_d2 = np.minimum(min_d2, _sq_dists(points, points[[next_index]])[:, 0])
    return points[chosen].copy()


def _repair_empty(points: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> None:
    """Reseed each empty cluster with the point farthest from its centroid."""
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        dists = np.einsum("np,np->n", points - centroids[labels], points - centroids[labels])
        movable = counts[labels] >= 2
        if not movable.any():
            continue
        dists = np.where(movable, dists, -np.inf)
        point = int(np.argmax(dists))
        counts[labels[point]] -= 1
        labels[point] = j
        counts[j] = 1
        centroids[j] = points[point]


def _lloyd(
    points: np.ndarray,
    centroids: np.ndarray,
    max_iter: int,
    tol: float,
) -> KMeansResult:
    labels = np.full(points.shape[0], -1, dtype=np.int64)
    history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        new_labels = np.argmin(_sq_dists(points, centroids), axis=1)
        _repair_empty(points, centroids, new_labels)
        for j in range(centroids.shape[0]):
            members = points[new_labels == j]
            if members.shape[0]:
                centroids[j] = members.mean(axis=0)
        diff = points - centroids[new_labels]
        wcss = float(np.einsum("np,np->", diff, diff))
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        if history and not converged:
            converged = (history[-1] - wcss) < tol * max(history[-1], 1e-300)
        history.append(wcss)
        if converged:
            break
    return KMeansResult(centroids=centroids, labels=labels,
                        wcss_history=history, iterations=iterations)


def kmeans_array(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    restarts: int = DEFAULT_RESTARTS,
    init: str = "random",
    init_centroids: np.ndarray | None = None,
) -> KMeansResult:
    """K-means over rows of ``points``; best of ``restarts`` seeded runs.

    Ties in assignment go to the lowest cluster id; empty clusters are
    reseeded with the farthest point from its centroid.  Fully deterministic
    for a given (points, k, seed, restarts, init).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty 2-D array")
    if k <= 0:
        raise ValueError("k must be positive")
    if k > _distinct_count(points):
        raise ValueError(f"k={k} exceeds number of distinct points")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")

    if init_centroids is not None:
        init_centroids = np.asarray(init_centroids, dtype=np.float64)
        if init_centroids.shape != (k, points.shape[1]):
            raise ValueError("init_centroids shape mismatch")
        return _lloyd(points, init_centroids.copy(), max_iter, tol)

    if init not in ("random", "farthest"):
        raise ValueError(f"unknown init: {init}")
    initializer = _init_random if init == "random" else _init_farthest

    best: KMeansResult | None = None
    for restart in range(max(1, restarts)):
        rng = np.random.default_rng([seed, restart])
        result = _lloyd(points, initializer(points, k, rng), max_iter, tol)
        if best is None or result.wcss < best.wcss:
            best = result
    return best


@dataclass
class Clustering:
    """Keyword -> cluster assignment with centroids and run diagnostics.

    Cluster ids are 1-based.  ``labels`` holds optional human-assigned names.
    """

    k: int
    assignments: dict[str, int]
    centroids: np.ndarray
    wcss_history: list[float]
    iterations: int
    seed: int
    labels: dict[int, str] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.centroids.shape[1]

    def members(self, cluster_id: int) -> list[str]:
        self._check_id(cluster_id)
        return [kw for kw, cid in self.assignments.items() if cid == cluster_id]

    def sizes(self) -> dict[int, int]:
        out = {cid: 0 for cid in range(1, self.k + 1)}
        for cid in self.assignments.values():
            out[cid] += 1
        return out

    def _check_id(self, cluster_id: int) -> None:
        if not 1 <= cluster_id <= self.k:
            raise ValueError(f"unknown cluster id: {cluster_id}")

    def to_json(self) -> str:
        payload = {
            "k": self.k,
            "seed": self.seed,
            "iterations": self.iterations,
            "dimension": int(self.centroids.shape[1]),
            "labels": {str(cid): name for cid, name in sorted(self.labels.items())},
            "centroids_f32_b64": base64.b64encode(
                np.ascontiguousarray(self.centroids, dtype="<f4").tobytes()).decode("ascii"),
            "assignments": self.assignments,
            "wcss_history": self.wcss_history,
        }
        return json.dumps(payload, sort_keys=True, indent=0)

    @classmethod
    def from_json(cls, text: str) -> "Clustering":
        data = json.loads(text)
        k = int(data["k"])
        p = int(data["dimension"])
        raw = base64.b64decode(data["centroids_f32_b64"])
        centroids = np.frombuffer(raw, dtype="<f4").reshape(k, p).astype(np.float64)
        return cls(
            k=k,
            assignments={str(kw): int(cid) for kw, cid in data["assignments"].items()},
            centroids=centroids,
            wcss_history=[float(x) for x in data["wcss_history"]],
            iterations=int(data["iterations"]),
            seed=int(data["seed"]),
            labels={int(cid): str(name) for cid, name in data.get("labels", {}).items()},
        )


def kmeans(
    embeddings: Mapping[str, np.ndarray],
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    restarts: int = DEFAULT_RESTARTS,
    init: str = "random",
) -> Clustering:
    """Cluster a keyword -> vector map; insertion order fixes row order."""
    keywords = list(embeddings)
    if not keywords:
        raise ValueError("no embeddings")
    points = np.stack([np.asarray(embeddings[kw], dtype=np.float64) for kw in keywords])
    result = kmeans_array(points, k, seed, max_iter, tol, restarts, init)
    assignments = {kw: int(label) + 1 for kw, label in zip(keywords, result.labels)}
    return Clustering(
        k=k,
        assignments=assignments,
        centroids=result.centroids,
        wcss_history=result.wcss_history,
        iterations=result.iterations,
        seed=seed,
    )


def wcss(clustering: Clustering, embeddings: Mapping[str, np.ndarray]) -> float:
    """Recompute the objective from assignments; errors on missing embeddings."""
    total = 0.0
    for keyword, cluster_id in clustering.assignments.items():
        if keyword not in embeddings:
            raise ValueError(f"missing embedding for keyword: {keyword!r}")
        diff = np.asarray(embeddings[keyword], dtype=np.float64) - clustering.centroids[cluster_id - 1]
        total += float(diff @ diff)
    return total


def assign_new(embedding: np.ndarray, clustering: Clustering) -> int:
    """Nearest-centroid cluster id for an unseen vector (ties -> lowest id)."""
    vec = np.asarray(embedding, dtype=np.float64)
    if vec.shape != (clustering.dimension,):
        raise ValueError(f"dimension mismatch: {vec.shape} vs ({clustering.dimension},)")
    diff = clustering.centroids - vec
    return int(np.argmin(np.einsum("kp,kp->k", diff, diff))) + 1


def paper_clusters(paper: PaperRecord, assignments: Mapping[str, int]) -> set[int]:
    """Union of cluster ids over the paper's final keywords; may be empty."""
    return {assignments[kw] for kw in paper.final_keywords if kw in assignments}


@dataclass
class WordCloudSpec:
    cluster_id: int
    weights: dict[str, float]


def wordcloud_weights(
    cluster_id: int,
    clustering: Clustering,
    embeddings: Mapping[str, np.ndarray],
) -> WordCloudSpec:
    """Per-keyword display weight 1 - d/d_max within the cluster.

    The keyword nearest the centroid gets the largest weight; the farthest
    gets 0.  A single-member (or degenerate) cluster weights everything 1.
    """
    members = clustering.members(cluster_id)
    if not members:
        raise ValueError(f"cluster {cluster_id} has no members")
    centroid = clustering.centroids[cluster_id - 1]
    dists = {}
    for kw in members:
        if kw not in embeddings:
            raise ValueError(f"missing embedding for keyword: {kw!r}")
        dists[kw] = float(np.linalg.norm(np.asarray(embeddings[kw], dtype=np.float64) - centroid))
    d_max = max(dists.values())
    if d_max == 0.0:
        return WordCloudSpec(cluster_id, {kw: 1.0 for kw in members})
    return WordCloudSpec(cluster_id, {kw: 1.0 - d / d_max for kw, d in dists.items()})


def _top_eigenpairs(matrix: np.ndarray, count: int, tol: float = 1e-9,
                    max_iter: int = 10_000) -> list[tuple[float, np.ndarray]]:
    """Leading eigenpairs of a symmetric PSD matrix by power iteration with deflation.

    Iterates are re-orthogonalized against already-found eigenvectors so
    rank-deficient inputs yield clean zero components instead of leakage.
    """
    work = matrix.copy()
    p = work.shape[0]
    rng = np.random.default_rng(0)
    pairs: list[tuple[float, np.ndarray]] = []
    for _ in range(count):
        v = rng.standard_normal(p)
        for _, prev in pairs:
            v -= (v @ prev) * prev
        v /= np.linalg.norm(v)
        value = 0.0
        for _ in range(max_iter):
            w = work @ v
            for _, prev in pairs:
                w -= (w @ prev) * prev
            norm = np.linalg.norm(w)
            if norm < 1e-300:
                value = 0.0
                break
            new_v = w / norm
            new_value = float(new_v @ work @ new_v)
            converged = abs(new_value - value) <= tol * max(1.0, abs(new_value))
            v, value = new_v, new_value
            if converged:
                break
        pairs.append((value, v))
        work -= value * np.outer(v, v)
    return pairs


@dataclass
class CentroidProjection:
    coords: dict[int, tuple[float, float]]
    edges: list[tuple[tuple[int, ...], int]] = field(default_factory=list)
    node_sizes: dict[int, int] = field(default_factory=dict)


def pca_project_centroids(clustering: Clustering) -> dict[int, tuple[float, float]]:
    """Project centroids onto their top-2 principal components.

    Components are sign-fixed so the largest-magnitude coordinate of each is
    positive, making the output deterministic.
    """
    if clustering.k < 2:
        raise ValueError("need at least 2 clusters to project")
    centroids = np.asarray(clustering.centroids, dtype=np.float64)
    centered = centroids - centroids.mean(axis=0)
    cov = (centered.T @ centered) / centroids.shape[0]
    pairs = _top_eigenpairs(cov, 2)
    coords = np.stack([centered @ v for _, v in pairs], axis=1)
    for column in range(2):
        extreme = int(np.argmax(np.abs(coords[:, column])))
        if coords[extreme, column] < 0:
            coords[:, column] = -coords[:, column]
    return {cid + 1: (float(x), float(y)) for cid, (x, y) in enumerate(coords)}


def make_projection(
    clustering: Clustering,
    edges: Iterable[tuple[Sequence[int], int]] = (),
) -> CentroidProjection:
    """Projection coords plus association edges and per-cluster sizes."""
    return CentroidProjection(
        coords=pca_project_centroids(clustering),
        edges=[(tuple(sorted(lhs)), int(rhs)) for lhs, rhs in edges],
        node_sizes=clustering.sizes(),
    )
