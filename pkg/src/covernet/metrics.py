"""Topological metrics of thresholded networks and their random-graph baselines.

Six quantities are tracked per network: density, number of (weak)
components, size of the giant strong component, number of isolated nodes,
global efficiency and mean local clustering coefficient.  Baselines come from
uniform random directed graphs with the same number of nodes and links,
G(n, L).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .errors import InvalidInputError
from .graph import DissimilarityMatrix, Network, threshold_graph

METRIC_NAMES = (
    "density",
    "component_count",
    "giant_strong_size",
    "isolated_count",
    "efficiency",
    "clustering_coefficient",
)


@dataclass(frozen=True)
class MetricsRow:
    threshold: float
    density: float
    component_count: float
    giant_strong_size: float
    isolated_count: float
    efficiency: float
    clustering_coefficient: float

    def values(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in METRIC_NAMES], dtype=float)

    @classmethod
    def from_values(cls, threshold, values) -> "MetricsRow":
        return cls(threshold, *(float(v) for v in values))


# above this edge density dense float32 BLAS beats sparse products
_DENSE_FILL = 0.02


def _adjacency(a):
    """``a`` as float32, dense when well filled; integer counts below 2**24 stay exact."""
    if a.nnz > _DENSE_FILL * a.shape[0] ** 2:
        return a.toarray().astype(np.float32)
    return a.astype(np.float32)


def clustering_coefficient(g: Network) -> float:
    """Mean local clustering on the undirected, unweighted projection.

    Nodes with fewer than two neighbours contribute zero.
    """
    if g.n == 0:
        return 0.0
    return _clustering(g.to_csr(symmetric=True, unweighted=True))


def _clustering(a) -> float:
    deg = np.asarray(a.sum(axis=1)).ravel()
    a = _adjacency(a)
    if isinstance(a, np.ndarray):
        closed = ((a @ a) * a).sum(axis=1, dtype=np.float64)
    else:
        closed = np.asarray((a @ a).multiply(a).sum(axis=1), dtype=np.float64).ravel()  # 2 x triangles
    pairs = deg * (deg - 1)
    local = np.divide(closed, pairs, out=np.zeros_like(closed, dtype=float), where=pairs > 0)
    return float(local.mean())


def _hop_harmonic_sum(a) -> float:
    """Sum of 1/d(i, j) over reachable ordered pairs i != j, by BFS from every source at once.

    Columns index sources.  Level k is one product of the transposed
    adjacency with the frontier; sources whose frontier empties are dropped.
    """
    dense = a.toarray().T
    if a.nnz > _DENSE_FILL * a.shape[0] ** 2:
        at = np.ascontiguousarray(dense, dtype=np.float32)
    else:
        at = a.T.tocsr().astype(np.float32)
    frontier = dense.astype(bool)
    visited = frontier.copy()
    np.fill_diagonal(visited, True)
    total = float(a.nnz)
    k = 1
    while frontier.shape[1]:
        k += 1
        new = np.asarray(at @ frontier.astype(np.float32)) > 0
        new = new > visited  # reached now and not before
        count = int(np.count_nonzero(new))
        if count == 0:
            break
        total += count / k
        visited |= new
        keep = new.any(axis=0)
        if not keep.all():
            visited, new = visited[:, keep], new[:, keep]
        frontier = new
    return total


def efficiency(g: Network, mode: str = "hop", m: DissimilarityMatrix | None = None) -> float:
    """Global efficiency, the mean of inverse shortest-path lengths.

    ``mode="hop"`` counts hops; unreachable pairs contribute zero.
    ``mode="weighted"`` uses edge weights as lengths and divides by the ideal
    harmonic sum of the direct weights in ``m``, clamped to [0, 1].
    """
    n = g.n
    if n < 2 or g.edge_count == 0:
        return 0.0
    if mode == "hop":
        return min(1.0, _hop_harmonic_sum(g.to_csr(unweighted=True)) / (n * (n - 1)))
    if mode == "weighted":
        if m is None:
            raise InvalidInputError("weighted efficiency needs the dissimilarity matrix")
        off = ~np.eye(n, dtype=bool)
        direct = m.weights[off]
        if (direct <= 0).any():
            raise InvalidInputError("weighted efficiency needs strictly positive weights")
        if (g.weights <= 0).any():
            raise InvalidInputError("weighted efficiency needs strictly positive edge weights")
        d = csgraph.shortest_path(g.to_csr(), directed=g.directed)
        denom = float(np.sum(1.0 / direct))
    else:
        raise InvalidInputError(f"unknown efficiency mode {mode!r}")
    np.fill_diagonal(d, np.inf)
    total = float(np.sum(1.0 / d))
    return min(1.0, total / denom)


def compute_metrics(
    g: Network,
    m: DissimilarityMatrix | None = None,
    threshold: float = float("nan"),
    efficiency_mode: str = "hop",
) -> MetricsRow:
    n = g.n
    links = g.edge_count if g.directed else 2 * g.edge_count
    density = links / (n * (n - 1)) if n > 1 else 0.0
    if n == 0:
        return MetricsRow(threshold, density, 0, 0, 0, 0.0, 0.0)
    a = g.to_csr(unweighted=True)
    u = g.to_csr(symmetric=True, unweighted=True)
    weak = csgraph.connected_components(u, directed=False, return_labels=False)
    _, strong = csgraph.connected_components(a, directed=True, connection="strong")
    if efficiency_mode == "hop" and n > 1 and g.edge_count:
        eff = min(1.0, _hop_harmonic_sum(a) / (n * (n - 1)))
    else:
        eff = efficiency(g, efficiency_mode, m)
    return MetricsRow(
        threshold=threshold,
        density=density,
        component_count=int(weak),
        giant_strong_size=int(np.bincount(strong).max()),
        isolated_count=int(np.sum(np.diff(u.indptr) == 0)),
        efficiency=eff,
        clustering_coefficient=_clustering(u),
    )


def random_digraph(n: int, links: int, rng: np.random.Generator, weights=None) -> Network:
    """Uniform directed graph with exactly ``links`` distinct edges.

    ``weights``, if given, is a pool of ``links`` edge weights assigned in
    random order; otherwise every edge has weight 1.
    """
    total = n * (n - 1)
    if not 0 <= links <= total:
        raise InvalidInputError(f"links must lie in [0, {total}]")
    if links > total // 2:
        keep = np.ones(total, dtype=bool)
        keep[rng.choice(total, size=total - links, replace=False)] = False
        k = np.flatnonzero(keep)
    else:
        k = np.sort(rng.choice(total, size=links, replace=False)) if links else np.zeros(0, int)
    src = k // (n - 1) if n > 1 else k
    off = k % (n - 1) if n > 1 else k
    dst = off + (off >= src)
    w = np.ones(links) if weights is None else rng.permutation(np.asarray(weights, float))
    return Network(n, src, dst, w, directed=True)


def er_baseline_stats(
    n: int,
    links: int,
    trials: int = 100,
    seed: int = 0,
    efficiency_mode: str = "hop",
    m: DissimilarityMatrix | None = None,
    weights=None,
    threshold: float = float("nan"),
) -> tuple[MetricsRow, MetricsRow]:
    """Monte Carlo mean and standard error of every metric over G(n, L).

    Trial ``k`` draws from ``default_rng(seed + k)`` so results do not depend
    on evaluation order.
    """
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    samples = np.empty((trials, len(METRIC_NAMES)))
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        g = random_digraph(n, links, rng, weights)
        samples[k] = compute_metrics(g, m, threshold, efficiency_mode).values()
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros_like(mean)
    return MetricsRow.from_values(threshold, mean), MetricsRow.from_values(threshold, se)


def er_baseline(n: int, links: int, trials: int = 100, seed: int = 0, **kw) -> MetricsRow:
    """Mean metrics over ``trials`` random directed graphs with ``links`` edges."""
    return er_baseline_stats(n, links, trials, seed, **kw)[0]


@dataclass(frozen=True)
class SweepRow:
    observed: MetricsRow
    baseline: MetricsRow
    baseline_se: MetricsRow

    @property
    def threshold(self) -> float:
        return self.observed.threshold


def threshold_sweep(
    m: DissimilarityMatrix,
    thresholds,
    trials: int = 100,
    seed: int = 0,
    efficiency_mode: str = "hop",
    directed: bool = True,
) -> list[SweepRow]:
    thresholds = [float(t) for t in thresholds]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise InvalidInputError("thresholds must be strictly increasing")
    rows = []
    for t in thresholds:
        g = threshold_graph(m, t, directed=directed)
        obs = compute_metrics(g, m, t, efficiency_mode)
        links = g.edge_count if g.directed else 2 * g.edge_count
        pool = None
        if efficiency_mode == "weighted":
            pool = g.weights if g.directed else np.concatenate([g.weights, g.weights])
        mean, se = er_baseline_stats(
            m.n, links, trials, seed, efficiency_mode, m, pool, threshold=t
        )
        rows.append(SweepRow(obs, mean, se))
    return rows


SWEEP_HEADER = (
    ["threshold"]
    + list(METRIC_NAMES)
    + [f"baseline_{k}" for k in METRIC_NAMES]
    + [f"baseline_{k}_se" for k in METRIC_NAMES]
)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SWEEP_HEADER)
        for r in rows:
            out.writerow(
                [_fmt(r.threshold)]
                + [_fmt(v) for v in r.observed.values()]
                + [_fmt(v) for v in r.baseline.values()]
                + [_fmt(v) for v in r.baseline_se.values()]
            )


def read_sweep_csv(path) -> list[SweepRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            t = float(rec["threshold"])
            obs = [float(rec[k]) for k in METRIC_NAMES]
            base = [float(rec[f"baseline_{k}"]) for k in METRIC_NAMES]
            se = [float(rec[f"baseline_{k}_se"]) for k in METRIC_NAMES]
            rows.append(
                SweepRow(
                    MetricsRow.from_values(t, obs),
                    MetricsRow.from_values(t, base),
                    MetricsRow.from_values(t, se),
                )
            )
    return rows

