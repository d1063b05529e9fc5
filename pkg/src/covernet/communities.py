"""Network-based community detectors.

* MO   - Louvain modularity optimisation on the thresholded network.
* PM1  - threshold, cap each node at its nearest neighbours, take connected
         components.
* PM2  - PM1's network, then one sequential pass over node pairs that adds or
         removes each edge so as to maximise complete triangles minus
         ``alpha`` times open wedges.
* PM3  - PM2 restricted to pairs whose dissimilarity lies within ``margin``
         of the threshold.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .graph import (
    DissimilarityMatrix,
    Network,
    connected_components,
    knn_prune,
    threshold_graph,
)
from .partition import Partition


@dataclass(frozen=True)
class CommunityConfig:
    w_th: float
    r_th: int = 2
    alpha: float = 1.0
    margin: float = 0.05
    seed: int = 0
    knn_rule: str = "union"
    mo_weighting: str = "linear"
    pm2_fixpoint: bool = False

    def __post_init__(self):
        if not self.w_th > 0:
            raise InvalidInputError("w_th must be positive")
        if self.r_th < 1:
            raise InvalidInputError("r_th must be >= 1")
        if self.alpha < 0:
            raise InvalidInputError("alpha must be non-negative")
        if self.margin < 0:
            raise InvalidInputError("margin must be non-negative")
        if self.mo_weighting not in ("linear", "inverse", "unweighted"):
            raise InvalidInputError(f"unknown MO weighting {self.mo_weighting!r}")


# --- modularity ----------------------------------------------------------------

def modularity(g: Network, p: Partition, weighted: bool = True) -> float:
    """Newman-Girvan modularity of an undirected network."""
    if g.directed:
        raise InvalidInputError("modularity expects an undirected network")
    w = g.weights if weighted else np.ones(g.edge_count)
    two_m = 2.0 * float(w.sum())
    if two_m <= 0:
        raise InvalidInputError("network has zero total weight")
    a = p.assignment
    k = np.bincount(g.sources, w, g.n) + np.bincount(g.targets, w, g.n)
    inside = a[g.sources] == a[g.targets]
    internal = 2.0 * np.bincount(a[g.sources][inside], w[inside], p.group_count)
    tot = np.bincount(a, k, p.group_count)
    return float(np.sum(internal / two_m - (tot / two_m) ** 2))


def _louvain_level(adj: list[dict[int, float]], loops: list[float], two_m: float):
    """One local-moving phase; returns community labels and whether anything moved."""
    n = len(adj)
    k = np.array([sum(nb.values()) + loops[u] for u, nb in enumerate(adj)])
    comm = list(range(n))
    tot = k.tolist()
    moved_any = False
    improved = True
    while improved:
        improved = False
        for u in range(n):
            cu = comm[u]
            links: dict[int, float] = {}
            for v, wt in adj[u].items():
                links[comm[v]] = links.get(comm[v], 0.0) + wt
            tot[cu] -= k[u]
            ku = k[u] / two_m
            stay = links.get(cu, 0.0) - tot[cu] * ku
            best, best_gain = cu, stay
            for c in sorted(links):
                gain = links[c] - tot[c] * ku
                if gain > best_gain + 1e-12:
                    best, best_gain = c, gain
            tot[best] += k[u]
            if best != cu:
                comm[u] = best
                improved = True
                moved_any = True
    return comm, moved_any


def louvain(g: Network) -> Partition:
    """Deterministic Louvain: nodes visited by index, moves need a positive gain."""
    if g.directed:
        raise InvalidInputError("louvain expects an undirected network")
    n = g.n
    total = float(g.weights.sum())
    if n == 0 or total <= 0:
        return Partition.singletons(n)
    two_m = 2.0 * total
    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    for s, t, w in g.edges():
        adj[s][t] = adj[s].get(t, 0.0) + w
        adj[t][s] = adj[t].get(s, 0.0) + w
    loops = [0.0] * n
    membership = np.arange(n)
    while True:
        comm, moved = _louvain_level(adj, loops, two_m)
        if not moved:
            break
        labels = Partition(np.array(comm)).assignment
        membership = labels[membership]
        size = int(labels.max()) + 1
        new_adj: list[dict[int, float]] = [dict() for _ in range(size)]
        new_loops = [0.0] * size
        for u in range(len(adj)):
            cu = labels[u]
            new_loops[cu] += loops[u]
            for v, wt in adj[u].items():
                cv = labels[v]
                if cu == cv:
                    new_loops[cu] += wt  # each internal edge seen from both ends
                else:
                    new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + wt
        adj, loops = new_adj, new_loops
    return Partition(membership)


def mo_network(m: DissimilarityMatrix, cfg: CommunityConfig) -> Network:
    """Thresholded network carrying similarity weights for modularity."""
    g = threshold_graph(m, cfg.w_th, directed=False)
    if cfg.mo_weighting == "linear":
        w = cfg.w_th - g.weights
    elif cfg.mo_weighting == "inverse":
        w = 1.0 / np.maximum(g.weights, 1e-12)
    else:
        w = np.ones(g.edge_count)
    return Network(g.n, g.sources, g.targets, w, directed=False)


def detect_mo(m: DissimilarityMatrix, cfg: CommunityConfig) -> Partition:
    return louvain(mo_network(m, cfg))


# --- PM1 -----------------------------------------------------------------------

def pm1_network(m: DissimilarityMatrix, cfg: CommunityConfig) -> Network:
    g = threshold_graph(m, cfg.w_th, directed=False)
    return knn_prune(g, m, cfg.r_th, cfg.knn_rule)


def detect_pm1(m: DissimilarityMatrix, cfg: CommunityConfig) -> Partition:
    return connected_components(pm1_network(m, cfg))


# --- triangle coherence (PM2 / PM3) ----------------------------------------------

def _pair_counts(adj: list[set[int]], i: int, j: int) -> tuple[int, int]:
    ni, nj = adj[i], adj[j]
    common = len(ni & nj)
    exclusive = len(ni) - (j in ni) + len(nj) - (i in nj) - 2 * common
    return common, exclusive


def triangle_objective(g, i: int, j: int, alpha: float) -> tuple[float, float]:
    """Local triangle score with and without edge (i, j).

    With the edge, every common neighbour closes a triangle and every
    neighbour of exactly one endpoint leaves an open wedge; without it, every
    common neighbour leaves an open wedge.  Returns
    ``(f_with_edge, f_without_edge)``.
    """
    if i == j:
        raise InvalidInputError("pair must have distinct endpoints")
    adj = g.neighbor_sets() if isinstance(g, Network) else g
    common, exclusive = _pair_counts(adj, i, j)
    return common - alpha * exclusive, -alpha * common


@dataclass
class PassStats:
    visited: int = 0
    added: int = 0
    removed: int = 0
    passes: int = 0


def _decide(adj: list[set[int]], i: int, j: int, alpha: float, stats: PassStats) -> int:
    """Apply the better of the two states for (i, j); returns +1 added, -1 removed, 0."""
    stats.visited += 1
    common, exclusive = _pair_counts(adj, i, j)
    f_with = common - alpha * exclusive
    f_without = -alpha * common
    present = j in adj[i]
    if f_with > f_without and not present:
        adj[i].add(j)
        adj[j].add(i)
        stats.added += 1
        return 1
    if f_without > f_with and present:
        adj[i].discard(j)
        adj[j].discard(i)
        stats.removed += 1
        return -1
    return 0


def _pass_all(adj: list[set[int]], alpha: float, stats: PassStats) -> bool:
    """Lexicographic pass over every pair.

    Pairs that are neither adjacent nor share a neighbour cannot change state,
    so only pairs within two hops are evaluated; the candidate heap grows as
    edges incident to ``i`` are added.
    """
    changed = False
    for i in range(len(adj)):
        seen = {j for j in adj[i] if j > i}
        for v in adj[i]:
            seen.update(k for k in adj[v] if k > i)
        heap = sorted(seen)
        while heap:
            j = heapq.heappop(heap)
            if j not in adj[i] and adj[i].isdisjoint(adj[j]):
                continue
            delta = _decide(adj, i, j, alpha, stats)
            if delta:
                changed = True
            if delta > 0:
                for k in adj[j]:
                    if k > j and k not in seen:
                        seen.add(k)
                        heapq.heappush(heap, k)
    return changed


def _pass_pairs(adj: list[set[int]], rows: list[int], cols: list[int], alpha: float, stats: PassStats) -> bool:
    changed = False
    for i, j in zip(rows, cols):
        if j not in adj[i] and adj[i].isdisjoint(adj[j]):
            continue
        if _decide(adj, i, j, alpha, stats):
            changed = True
    return changed


def _run_passes(step, cfg: CommunityConfig, stats: PassStats, max_passes: int = 10) -> None:
    limit = max_passes if cfg.pm2_fixpoint else 1
    for _ in range(limit):
        stats.passes += 1
        if not step():
            break


def _to_partition(adj: list[set[int]]) -> Partition:
    edges = [(i, j, 1.0) for i, nb in enumerate(adj) for j in nb if i < j]
    return connected_components(Network.from_edges(len(adj), edges, directed=False))


def detect_pm2(m: DissimilarityMatrix, cfg: CommunityConfig, stats: PassStats | None = None) -> Partition:
    stats = PassStats() if stats is None else stats
    adj = pm1_network(m, cfg).neighbor_sets()
    _run_passes(lambda: _pass_all(adj, cfg.alpha, stats), cfg, stats)
    return _to_partition(adj)


def margin_pairs(m: DissimilarityMatrix, w_th: float, margin: float) -> list[np.ndarray]:
    """For each i, the j > i with ``|w[i][j] - w_th| < margin``, ascending."""
    near = np.triu(np.abs(m.weights - w_th) < margin, 1)
    rows, cols = np.nonzero(near)
    return np.split(cols, np.searchsorted(rows, np.arange(1, m.n)))


def detect_pm3(m: DissimilarityMatrix, cfg: CommunityConfig, stats: PassStats | None = None) -> Partition:
    stats = PassStats() if stats is None else stats
    adj = pm1_network(m, cfg).neighbor_sets()
    rows, cols = np.nonzero(np.triu(np.abs(m.weights - cfg.w_th) < cfg.margin, 1))
    rows, cols = rows.tolist(), cols.tolist()
    _run_passes(lambda: _pass_pairs(adj, rows, cols, cfg.alpha, stats), cfg, stats)
    return _to_partition(adj)
