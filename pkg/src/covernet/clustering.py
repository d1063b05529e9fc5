"""Baseline grouping: K-medoids and agglomerative hierarchical clustering.

Linkage construction is delegated to :func:`scipy.cluster.hierarchy.linkage`;
the dendrogram is kept in its own small type so that cutting rules are
explicit and testable here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster import hierarchy
from scipy.spatial.distance import squareform
from sklearn.metrics import silhouette_score

from .errors import InvalidInputError
from .graph import DissimilarityMatrix
from .partition import Partition

LINKAGE_METHODS = {
    "SL": "single",
    "CL": "complete",
    "UPGMA": "average",
    "WPGMA": "weighted",
}


def _require_symmetric(m: DissimilarityMatrix) -> None:
    if not m.is_symmetric():
        raise InvalidInputError("clustering requires a symmetric dissimilarity matrix")


# --- K-medoids ---------------------------------------------------------------

def _farthest_point_medoids(w: np.ndarray, k: int, start: int) -> np.ndarray:
    medoids = [start]
    nearest = w[start].copy()
    for _ in range(1, k):
        nearest[medoids] = -1.0
        nxt = int(np.argmax(nearest))  # ties -> lowest index
        medoids.append(nxt)
        nearest = np.minimum(nearest, w[nxt])
    return np.array(medoids, dtype=np.int64)


def _assign(w: np.ndarray, medoids: np.ndarray) -> np.ndarray:
    labels = np.argmin(w[:, medoids], axis=1)
    labels[medoids] = np.arange(medoids.size)  # a medoid always owns itself
    return labels


def kmedoids_objective(w: np.ndarray, medoids) -> float:
    return float(np.sum(np.min(w[:, np.asarray(medoids)], axis=1)))


@dataclass(frozen=True)
class KMedoidsResult:
    partition: Partition
    medoids: np.ndarray
    objective: float
    history: tuple[float, ...]


def kmedoids_fit(m: DissimilarityMatrix, k: int, seed: int = 0, max_iter: int = 100) -> KMedoidsResult:
    """Alternate nearest-medoid assignment and medoid re-election.

    Initial medoids are chosen greedily by farthest point starting from a
    node picked with ``seed``.  Stops when the medoid set no longer changes.
    """
    _require_symmetric(m)
    n = m.n
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must lie in [1, {n}], got {k}")
    w = m.weights
    start = int(np.random.default_rng(seed).integers(n))
    medoids = _farthest_point_medoids(w, k, start)
    history = [kmedoids_objective(w, medoids)]
    for _ in range(max_iter):
        labels = _assign(w, medoids)
        new = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(labels == c)
            cost = w[np.ix_(members, members)].sum(axis=1)
            incumbent = np.flatnonzero(members == medoids[c])[0]
            # keep the incumbent on ties so the loop cannot cycle
            new[c] = medoids[c] if cost[incumbent] <= cost.min() else members[int(np.argmin(cost))]
        history.append(kmedoids_objective(w, new))
        if np.array_equal(new, medoids):
            break
        medoids = new
    labels = _assign(w, medoids)
    return KMedoidsResult(Partition(labels), medoids, kmedoids_objective(w, medoids), tuple(history))


def kmedoids(m: DissimilarityMatrix, k: int, seed: int = 0) -> Partition:
    return kmedoids_fit(m, k, seed).partition


def mean_silhouette(m: DissimilarityMatrix, p: Partition) -> float:
    """Mean silhouette on precomputed dissimilarities; 0 for degenerate partitions."""
    if not 2 <= p.group_count <= m.n - 1:
        return 0.0
    return float(silhouette_score(m.weights, p.assignment, metric="precomputed"))


def select_k(m: DissimilarityMatrix, k_range, seed: int = 0) -> int:
    """Pick the k in ``k_range`` whose K-medoids solution has the best mean silhouette.

    ``k_range`` is an inclusive ``(lo, hi)`` pair or any iterable of
    candidates.  Ties go to the smallest k.
    """
    best_k, _ = select_k_scored(m, k_range, seed)
    return best_k


def select_k_scored(m: DissimilarityMatrix, k_range, seed: int = 0) -> tuple[int, float]:
    if isinstance(k_range, tuple) and len(k_range) == 2:
        candidates = range(k_range[0], k_range[1] + 1)
    else:
        candidates = k_range
    candidates = sorted(set(int(k) for k in candidates))
    if not candidates or candidates[0] < 1 or candidates[-1] > m.n:
        raise InvalidInputError(f"k range must lie within [1, {m.n}]")
    best_k, best_score = candidates[0], -np.inf
    for k in candidates:
        score = mean_silhouette(m, kmedoids(m, k, seed))
        if score > best_score:
            best_k, best_score = k, score
    return best_k, float(best_score)


# --- hierarchical clustering ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Merge list in scipy's convention.

    Row ``k`` merges clusters ``left`` and ``right`` at ``height`` into a new
    cluster with id ``n + k`` holding ``size`` items; ids below ``n`` are
    leaves.
    """

    n: int
    left: np.ndarray
    right: np.ndarray
    height: np.ndarray
    size: np.ndarray

    @classmethod
    def from_linkage(cls, z: np.ndarray, n: int) -> "Dendrogram":
        z = np.asarray(z, dtype=float).reshape(-1, 4)
        return cls(n, z[:, 0].astype(np.int64), z[:, 1].astype(np.int64), z[:, 2].copy(), z[:, 3].astype(np.int64))

    def to_linkage(self) -> np.ndarray:
        return np.column_stack([self.left, self.right, self.height, self.size]).astype(float)

    @property
    def monotonic(self) -> bool:
        return bool(np.all(np.diff(self.height) >= 0))

    def merges(self) -> list[tuple[int, int, float, int]]:
        return list(zip(self.left.tolist(), self.right.tolist(), self.height.tolist(), self.size.tolist()))


def linkage(m: DissimilarityMatrix, method: str) -> Dendrogram:
    """Agglomerative clustering with SL, CL, UPGMA or WPGMA linkage."""
    _require_symmetric(m)
    try:
        scipy_method = LINKAGE_METHODS[method]
    except KeyError:
        raise InvalidInputError(f"unknown linkage method {method!r}") from None
    n = m.n
    if n < 2:
        return Dendrogram(n, *(np.zeros(0, dtype=t) for t in (np.int64, np.int64, float, np.int64)))
    z = hierarchy.linkage(squareform(m.weights, checks=False), method=scipy_method)
    return Dendrogram.from_linkage(z, n)


def _cut(d: Dendrogram, accept: np.ndarray) -> Partition:
    """Union the children of every accepted merge whose descendants are all accepted."""
    n = d.n
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    leaf_of = np.empty(n + len(d.height), dtype=np.int64)  # any leaf under each cluster id
    leaf_of[:n] = np.arange(n)
    whole = np.ones(n + len(d.height), dtype=bool)  # cluster id kept in one piece
    for k, (a, b) in enumerate(zip(d.left.tolist(), d.right.tolist())):
        leaf_of[n + k] = leaf_of[a]
        ok = bool(accept[k]) and whole[a] and whole[b]
        whole[n + k] = ok
        if ok:
            ra, rb = find(int(leaf_of[a])), find(int(leaf_of[b]))
            parent[max(ra, rb)] = min(ra, rb)
    return Partition(np.array([find(i) for i in range(n)], dtype=np.int64))


def cut_dendrogram(d: Dendrogram, d_th: float) -> Partition:
    """Flat clusters from the maximal merges with height <= ``d_th``."""
    if d_th < 0:
        raise InvalidInputError("distance threshold must be non-negative")
    return _cut(d, d.height <= d_th)


def inconsistency(d: Dendrogram, depth: int = 2) -> np.ndarray:
    """Inconsistency coefficient of every merge.

    Compares a merge's height with the mean and standard deviation of the
    merge heights within ``depth`` levels below it (the merge included);
    zero when the standard deviation vanishes.
    """
    if depth < 1:
        raise InvalidInputError("depth must be >= 1")
    if len(d.height) == 0:
        return np.zeros(0)
    r = hierarchy.inconsistent(d.to_linkage(), depth)
    return r[:, 3]


def cut_inconsistent(d: Dendrogram, depth: int, t: float) -> Partition:
    """Keep a merge only if it and every merge below it have inconsistency <= t."""
    return _cut(d, inconsistency(d, depth) <= t)


def detect_hierarchical(m: DissimilarityMatrix, method: str, d_th: float) -> Partition:
    return cut_dendrogram(linkage(m, method), d_th)
