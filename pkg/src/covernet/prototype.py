"""Locating the original ("prototype") item inside a community.

Both detectors work on the asymmetric weights restricted to one community.
Closeness picks the member with the smallest summed outgoing dissimilarity;
MST centrality applies the same rule to path lengths on the minimum spanning
tree of the symmetrised sub-network.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .datasets import Collection
from .errors import InvalidInputError
from .evaluation import binomial_pvalue, significance_stars
from .graph import DissimilarityMatrix, complete_network, minimum_spanning_tree, symmetrize

METHODS = ("closeness", "mst")


@dataclass(frozen=True, eq=False)
class CommunitySubnet:
    members: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.int64)
        w = np.asarray(self.weights, dtype=float)
        if members.size < 2:
            raise InvalidInputError("a community needs at least two members")
        if w.shape != (members.size, members.size):
            raise InvalidInputError("sub-matrix shape does not match member count")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_matrix(cls, m: DissimilarityMatrix, members) -> "CommunitySubnet":
        members = np.asarray(members, dtype=np.int64)
        return cls(members, m.weights[np.ix_(members, members)])

    @property
    def cardinality(self) -> int:
        return int(self.members.size)


def _near_min(scores: np.ndarray) -> np.ndarray:
    """Mask of scores tied with the minimum up to rounding (tree centres tie exactly in theory)."""
    lo = scores.min()
    return scores <= lo + 1e-12 * max(1.0, abs(lo))


def _argmin_first(scores: np.ndarray) -> int:
    return int(np.flatnonzero(_near_min(scores))[0])


def closeness_scores(s: CommunitySubnet) -> np.ndarray:
    """Summed outgoing weight of every member (diagonal is zero)."""
    return s.weights.sum(axis=1)


def closeness_prototype(s: CommunitySubnet) -> int:
    """Member with the smallest summed outgoing weight; ties go to the first member listed."""
    return int(s.members[_argmin_first(closeness_scores(s))])


def mst_scores(s: CommunitySubnet) -> np.ndarray:
    sub = symmetrize(DissimilarityMatrix(s.weights))
    tree = minimum_spanning_tree(complete_network(sub))
    dist = csgraph.shortest_path(tree.to_csr(), directed=False)
    return dist.sum(axis=1)


def mst_prototype(s: CommunitySubnet) -> int:
    """Closeness over tree-path lengths of the symmetrised minimum spanning tree."""
    return int(s.members[_argmin_first(mst_scores(s))])


_DETECTORS = {"closeness": (closeness_prototype, closeness_scores), "mst": (mst_prototype, mst_scores)}


@dataclass(frozen=True)
class PrototypeRow:
    method: str
    cardinality: int
    hits: int
    trials: int
    ties: int

    @property
    def hit_rate(self) -> float:
        return self.hits / self.trials

    @property
    def p_value(self) -> float:
        return binomial_pvalue(self.hits, self.trials, 1.0 / self.cardinality)


def run_prototype_experiment(
    c: Collection,
    m: DissimilarityMatrix,
    method: str,
    cardinalities=range(2, 8),
    seed: int = 0,
) -> list[PrototypeRow]:
    """Hit rate of a detector over the true groups that have an original.

    Members are visited in a random order drawn from ``seed`` so that the
    first-listed tie rule does not favour originals.  ``ties`` counts
    communities whose best score was shared.
    """
    if method not in _DETECTORS:
        raise InvalidInputError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if c.n != m.n:
        raise InvalidInputError("collection and matrix sizes differ")
    if not c.is_original.any():
        raise InvalidInputError("collection has no originals")
    pick, score = _DETECTORS[method]
    rng = np.random.default_rng(seed)
    wanted = set(int(k) for k in cardinalities)
    tally: dict[int, list[int]] = {}
    for members in c.truth().groups():
        size = members.size
        has = c.is_original[members]
        if size not in wanted or not has.any():
            continue
        order = rng.permutation(members)
        sub = CommunitySubnet.from_matrix(m, order)
        chosen = pick(sub)
        s = score(sub)
        row = tally.setdefault(size, [0, 0, 0])
        row[0] += int(c.is_original[chosen])
        row[1] += 1
        row[2] += int(np.count_nonzero(_near_min(s)) > 1)
    return [PrototypeRow(method, k, *tally[k]) for k in sorted(tally)]


PROTOTYPE_HEADER = ["method", "C", "hits", "trials", "hit_rate_percent", "p_value", "significance_stars", "ties"]


def write_prototype_csv(rows: list[PrototypeRow], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(PROTOTYPE_HEADER)
        for r in rows:
            p = r.p_value
            out.writerow(
                [r.method, r.cardinality, r.hits, r.trials, f"{100 * r.hit_rate:.1f}", repr(p), significance_stars(p), r.ties]
            )
