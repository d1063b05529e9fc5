"""Dissimilarity matrices and the sparse networks derived from them.

A :class:`DissimilarityMatrix` holds the dense, possibly asymmetric weights
``w[i][j]`` (low = similar) together with per-item durations.  Pruning it by
a threshold yields a :class:`Network`, a sparse edge list on which the
component, spanning-tree and community routines operate.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import FormatError, InvalidInputError
from .partition import Partition


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DissimilarityMatrix:
    weights: np.ndarray
    durations: np.ndarray | None = None

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidInputError(f"weights must be square, got shape {w.shape}")
        n = w.shape[0]
        if not np.isfinite(w).all():
            raise InvalidInputError("weights contain NaN or infinite values")
        if (w < 0).any():
            raise InvalidInputError("weights must be non-negative")
        if n and np.any(np.diag(w) != 0):
            raise InvalidInputError("diagonal must be zero")
        d = np.ones(n) if self.durations is None else self.durations
        d = _frozen(d)
        if d.shape != (n,):
            raise InvalidInputError(f"expected {n} durations, got shape {d.shape}")
        if not np.isfinite(d).all() or (d <= 0).any():
            raise InvalidInputError("durations must be finite and strictly positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "durations", d)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.weights, self.weights.T))

    def submatrix(self, idx) -> "DissimilarityMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return DissimilarityMatrix(self.weights[np.ix_(idx, idx)], self.durations[idx])

    def __eq__(self, other):
        if not isinstance(other, DissimilarityMatrix):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and np.array_equal(
            self.durations, other.durations
        )

    def __repr__(self):
        return f"DissimilarityMatrix(n={self.n}, symmetric={self.is_symmetric()})"


@dataclass(frozen=True, eq=False)
class SimilarityInput:
    """Raw pairwise similarity scores (higher = more similar) and durations."""

    qmax: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        q = _frozen(self.qmax)
        d = _frozen(self.durations)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise InvalidInputError(f"qmax must be square, got shape {q.shape}")
        n = q.shape[0]
        if d.shape != (n,):
            raise InvalidInputError(f"expected {n} durations, got shape {d.shape}")
        if not np.isfinite(d).all() or (d <= 0).any():
            raise InvalidInputError("durations must be strictly positive")
        off = ~np.eye(n, dtype=bool)
        if not np.isfinite(q[off]).all() or (q[off] < 1).any():
            raise InvalidInputError("off-diagonal similarity scores must be >= 1")
        object.__setattr__(self, "qmax", q)
        object.__setattr__(self, "durations", d)

    @property
    def n(self) -> int:
        return self.qmax.shape[0]


def from_qmax(inp: SimilarityInput) -> DissimilarityMatrix:
    """Convert similarities to dissimilarities, ``w[i][j] = sqrt(|s_j|) / q[i][j]``."""
    n = inp.n
    w = np.zeros((n, n))
    off = ~np.eye(n, dtype=bool)
    ratio = np.sqrt(inp.durations)[None, :] / np.where(off, inp.qmax, 1.0)
    w[off] = ratio[off]
    return DissimilarityMatrix(w, inp.durations)


def symmetrize(m: DissimilarityMatrix) -> DissimilarityMatrix:
    w = m.weights
    return DissimilarityMatrix((w + w.T) / 2.0, m.durations)


@dataclass(frozen=True, eq=False)
class Network:
    """Sparse weighted graph on nodes ``0..n-1``.

    Edges are kept sorted by ``(source, target)``.  Undirected edges are stored
    once with ``source < target``.
    """

    n: int
    sources: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    directed: bool = True

    def __post_init__(self):
        s = np.asarray(self.sources, dtype=np.int64).reshape(-1)
        t = np.asarray(self.targets, dtype=np.int64).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not (s.size == t.size == w.size):
            raise InvalidInputError("edge arrays differ in length")
        if s.size:
            if s.min() < 0 or t.min() < 0 or s.max() >= self.n or t.max() >= self.n:
                raise InvalidInputError("edge endpoint out of range")
            if (s == t).any():
                raise InvalidInputError("self-loops are not allowed")
            if not self.directed and (s > t).any():
                raise InvalidInputError("undirected edges must have source < target")
        key = s * max(self.n, 1) + t
        if key.size > 1 and not np.all(key[1:] > key[:-1]):
            order = np.argsort(key, kind="stable")
            s, t, w, key = s[order], t[order], w[order], key[order]
            if np.any(key[1:] == key[:-1]):
                raise InvalidInputError("duplicate edge")
        for name, a in (("sources", s), ("targets", t), ("weights", w)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_edges(cls, n: int, edges, directed: bool = True) -> "Network":
        edges = list(edges)
        if not edges:
            return cls(n, [], [], [], directed)
        s, t, w = zip(*edges)
        if not directed:
            s, t = np.minimum(s, t), np.maximum(s, t)
        return cls(n, s, t, w, directed)

    @property
    def edge_count(self) -> int:
        return int(self.sources.size)

    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.sources.tolist(), self.targets.tolist(), self.weights.tolist()))

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.sources.tolist(), self.targets.tolist()))

    def to_csr(self, symmetric: bool | None = None, unweighted: bool = False) -> sparse.csr_matrix:
        """Sparse adjacency; ``symmetric`` defaults to ``not self.directed``.

        In symmetric mode a pair linked in both directions keeps the smaller
        weight.
        """
        if symmetric is None:
            symmetric = not self.directed
        s, t = self.sources, self.targets
        if unweighted:
            a = sparse.csr_matrix((np.ones(self.edge_count), (s, t)), shape=(self.n, self.n))
            if symmetric:
                a = (a + a.T).tocsr()
                a.data[:] = 1.0
            return a
        w = self.weights
        if symmetric:
            s, t, w = np.concatenate([s, t]), np.concatenate([t, s]), np.concatenate([w, w])
            order = np.lexsort((w, t, s))
            s, t, w = s[order], t[order], w[order]
            first = np.ones(s.size, dtype=bool)
            first[1:] = (s[1:] != s[:-1]) | (t[1:] != t[:-1])
            s, t, w = s[first], t[first], w[first]
        return sparse.csr_matrix((w, (s, t)), shape=(self.n, self.n))

    def neighbor_sets(self) -> list[set[int]]:
        """Undirected projection as a list of neighbour sets."""
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for s, t in zip(self.sources.tolist(), self.targets.tolist()):
            adj[s].add(t)
            adj[t].add(s)
        return adj

    def degrees(self) -> np.ndarray:
        """Degree in the undirected projection."""
        return np.diff(self.to_csr(symmetric=True, unweighted=True).indptr).astype(np.int64)

    def undirected(self) -> "Network":
        """Undirected projection; overlapping directions keep the smaller weight."""
        if not self.directed:
            return self
        best: dict[tuple[int, int], float] = {}
        for s, t, w in self.edges():
            key = (s, t) if s < t else (t, s)
            if key not in best or w < best[key]:
                best[key] = w
        return Network.from_edges(self.n, ((a, b, w) for (a, b), w in best.items()), directed=False)

    def subgraph(self, nodes) -> "Network":
        nodes = np.asarray(nodes, dtype=np.int64)
        index = {int(v): k for k, v in enumerate(nodes)}
        keep = [
            (index[s], index[t], w)
            for s, t, w in self.edges()
            if s in index and t in index
        ]
        if not self.directed:
            keep = [(min(a, b), max(a, b), w) for a, b, w in keep]
        return Network.from_edges(len(nodes), keep, self.directed)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.n == other.n
            and self.directed == other.directed
            and np.array_equal(self.sources, other.sources)
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Network(n={self.n}, edges={self.edge_count}, {kind})"


def threshold_graph(m: DissimilarityMatrix, t: float, directed: bool = True) -> Network:
    """Keep every pair with ``w[i][j] <= t``.

    Undirected mode requires a symmetric matrix and emits each pair once.
    """
    if not t > 0:
        raise InvalidInputError("threshold must be positive")
    w = m.weights
    if not directed and not m.is_symmetric():
        raise InvalidInputError("undirected thresholding requires a symmetric matrix")
    mask = w <= t
    np.fill_diagonal(mask, False)
    if not directed:
        mask = np.triu(mask, k=1)
    s, tg = np.nonzero(mask)
    return Network(m.n, s, tg, w[s, tg], directed)


def knn_prune(g: Network, m: DissimilarityMatrix, r: int, rule: str = "union") -> Network:
    """Cap every node at its ``r`` lowest-weight surviving edges.

    A node's candidates are its out-edges (directed input) or all incident
    edges (undirected input), ranked by ``m[i][j]`` with ties to the lowest
    target index.  The kept choices are merged into an undirected network:
    ``rule="union"`` keeps an edge chosen by either endpoint,
    ``rule="intersection"`` only edges chosen by both.
    """
    if r < 1:
        raise InvalidInputError("r must be >= 1")
    if rule not in ("union", "intersection"):
        raise InvalidInputError(f"unknown rule {rule!r}")
    w = m.weights
    cand: list[list[int]] = [[] for _ in range(g.n)]
    for s, t in zip(g.sources.tolist(), g.targets.tolist()):
        cand[s].append(t)
        if not g.directed:
            cand[t].append(s)
    chosen: dict[tuple[int, int], int] = {}
    for i, targets in enumerate(cand):
        if not targets:
            continue
        targets = sorted(set(targets))
        ranked = sorted(targets, key=lambda j: (w[i, j], j))[:r]
        for j in ranked:
            key = (i, j) if i < j else (j, i)
            chosen[key] = chosen.get(key, 0) + 1
    need = 1 if rule == "union" else 2
    edges = [
        (a, b, (w[a, b] + w[b, a]) / 2.0)
        for (a, b), votes in chosen.items()
        if votes >= need
    ]
    return Network.from_edges(g.n, edges, directed=False)


def connected_components(g: Network) -> Partition:
    """Weak components, ignoring edge direction."""
    if g.n == 0:
        return Partition(np.zeros(0, dtype=np.int64))
    _, labels = csgraph.connected_components(
        g.to_csr(symmetric=False, unweighted=True), directed=True, connection="weak"
    )
    return Partition(labels)


def strong_components(g: Network) -> Partition:
    if g.n == 0:
        return Partition(np.zeros(0, dtype=np.int64))
    a = g.to_csr(symmetric=not g.directed, unweighted=True)
    _, labels = csgraph.connected_components(a, directed=True, connection="strong")
    return Partition(labels)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb
        return True


def minimum_spanning_tree(g: Network) -> Network:
    """Kruskal's algorithm; ties ordered by ``(weight, source, target)``."""
    if g.directed:
        raise InvalidInputError("minimum spanning tree needs an undirected network")
    uf = _UnionFind(g.n)
    keep = []
    for s, t, w in sorted(g.edges(), key=lambda e: (e[2], e[0], e[1])):
        if uf.union(s, t):
            keep.append((s, t, w))
            if len(keep) == g.n - 1:
                break
    if len(keep) != max(g.n - 1, 0):
        raise InvalidInputError("network is disconnected; no spanning tree exists")
    return Network.from_edges(g.n, keep, directed=False)


def complete_network(m: DissimilarityMatrix) -> Network:
    """Undirected complete graph over a symmetric matrix."""
    if not m.is_symmetric():
        raise InvalidInputError("complete_network requires a symmetric matrix")
    s, t = np.triu_indices(m.n, k=1)
    return Network(m.n, s, t, m.weights[s, t], directed=False)


# --- plain-text file formats -------------------------------------------------

def _parse_floats(line, path, lineno, what):
    try:
        vals = [float(x) for x in line.split()]
    except ValueError:
        raise FormatError(f"non-numeric value in {what}", path, lineno) from None
    arr = np.array(vals)
    if np.isnan(arr).any():
        raise FormatError(f"NaN in {what}", path, lineno)
    if not np.isfinite(arr).all():
        raise FormatError(f"infinite value in {what}", path, lineno)
    if (arr < 0).any():
        raise FormatError(f"negative value in {what}", path, lineno)
    return arr


def read_matrix(path) -> np.ndarray:
    """Header line ``n`` followed by ``n`` rows of ``n`` decimals."""
    path = Path(path)
    with open(path) as fh:
        lines = [(k, ln) for k, ln in enumerate(fh, 1) if ln.strip()]
    if not lines:
        raise FormatError("empty matrix file", path)
    lineno, header = lines[0]
    try:
        n = int(header.strip())
    except ValueError:
        raise FormatError("header must be a single integer n", path, lineno) from None
    rows = lines[1:]
    if len(rows) != n:
        raise FormatError(f"expected {n} rows, found {len(rows)}", path)
    out = np.empty((n, n))
    for r, (lineno, line) in enumerate(rows):
        vals = _parse_floats(line, path, lineno, f"row {r}")
        if vals.size != n:
            raise FormatError(f"row {r} has {vals.size} values, expected {n}", path, lineno)
        out[r] = vals
    if n and np.any(np.diag(out) != 0):
        bad = int(np.nonzero(np.diag(out) != 0)[0][0])
        raise FormatError(f"row {bad} has a non-zero diagonal entry", path, rows[bad][0])
    return out


def write_matrix(weights, path) -> None:
    w = np.asarray(weights, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{w.shape[0]}\n")
        for row in w:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_durations(path, n: int | None = None) -> np.ndarray:
    path = Path(path)
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            arr = _parse_floats(line, path, lineno, "durations")
            if (arr <= 0).any():
                raise FormatError("durations must be strictly positive", path, lineno)
            vals.extend(arr.tolist())
    if n is not None and len(vals) != n:
        raise FormatError(f"expected {n} durations, found {len(vals)}", path)
    return np.array(vals)


def write_durations(durations, path) -> None:
    with open(path, "w") as fh:
        for d in np.asarray(durations, dtype=float):
            fh.write(repr(float(d)) + "\n")


def load_matrix(matrix_path, durations_path=None) -> DissimilarityMatrix:
    w = read_matrix(matrix_path)
    d = None if durations_path is None else read_durations(durations_path, w.shape[0])
    return DissimilarityMatrix(w, d)


def save_matrix(m: DissimilarityMatrix, matrix_path, durations_path=None) -> None:
    write_matrix(m.weights, matrix_path)
    if durations_path is not None:
        write_durations(m.durations, durations_path)
