import itertools
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_matrix
from covernet.clustering import kmedoids_fit
from covernet.datasets import Collection, GeneratorParams, generate_collection
from covernet.errors import InvalidInputError
from covernet.graph import DissimilarityMatrix
from covernet.prototype import (
    PROTOTYPE_HEADER,
    CommunitySubnet,
    closeness_prototype,
    mst_prototype,
    run_prototype_experiment,
    write_prototype_csv,
)


def subnet(w, members=None):
    w = np.asarray(w, float)
    return CommunitySubnet(np.arange(len(w)) if members is None else members, w)


def tree_path_sums(n, edges):
    adj = [[] for _ in range(n)]
    for a, b, w in edges:
        adj[a].append((b, w))
        adj[b].append((a, w))
    sums = []
    for s in range(n):
        dist = {s: 0.0}
        q = deque([s])
        while q:
            u = q.popleft()
            for v, w in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + w
                    q.append(v)
        sums.append(sum(dist.values()))
    return sums


def mst_oracle(w):
    """Centre of the cheapest spanning tree found by enumerating every edge subset of size n-1."""
    n = len(w)
    sym = (w + w.T) / 2
    pairs = list(itertools.combinations(range(n), 2))
    best = None
    for subset in itertools.combinations(pairs, n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for a, b in subset:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if not ok:
            continue
        cost = sum(sym[a, b] for a, b in subset)
        if best is None or cost < best[0] - 1e-12:
            best = (cost, subset)
    edges = [(a, b, sym[a, b]) for a, b in best[1]]
    sums = np.array(tree_path_sums(n, edges))
    return int(np.flatnonzero(sums <= sums.min() + 1e-9)[0])


# --- closeness ---------------------------------------------------------------------------

def test_closeness_pair_picks_smaller_outgoing():
    assert closeness_prototype(subnet([[0, 0.3], [0.5, 0]])) == 0
    assert closeness_prototype(subnet([[0, 0.5], [0.3, 0]])) == 1


def test_closeness_tie_goes_to_first_listed():
    w = np.full((4, 4), 0.5)
    np.fill_diagonal(w, 0)
    assert closeness_prototype(subnet(w, [3, 7, 9, 12])) == 3
    assert closeness_prototype(subnet(w, [9, 3, 7, 12])) == 9


def test_closeness_random_against_row_sums(rng):
    for _ in range(20):
        w = random_matrix(6, rng).weights
        sums = [sum(w[i][j] for j in range(6) if j != i) for i in range(6)]
        assert closeness_prototype(subnet(w, np.arange(10, 16))) == 10 + int(np.argmin(sums))


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
@settings(max_examples=40)
def test_closeness_scale_invariant(seed, k):
    w = random_matrix(5, np.random.default_rng(seed)).weights
    assert closeness_prototype(subnet(w)) == closeness_prototype(subnet(w * k))


def test_closeness_equals_medoid_when_symmetric(rng):
    for seed in range(10):
        m = random_matrix(7, rng, symmetric=True)
        assert closeness_prototype(subnet(m.weights)) == int(kmedoids_fit(m, 1, seed=seed).medoids[0])


# --- MST ----------------------------------------------------------------------------------------

def test_mst_pair_is_always_a_tie():
    assert mst_prototype(subnet([[0, 0.3], [0.5, 0]], [4, 8])) == 4
    assert mst_prototype(subnet([[0, 0.5], [0.3, 0]], [8, 4])) == 8


def test_mst_star_finds_hub():
    w = np.full((5, 5), 0.9)
    w[2, :] = w[:, 2] = 0.1
    np.fill_diagonal(w, 0)
    assert mst_prototype(subnet(w)) == 2


def test_mst_random_against_brute_force(rng):
    for _ in range(10):
        w = random_matrix(6, rng).weights
        assert mst_prototype(subnet(w)) == mst_oracle(w)


def test_subnet_validation():
    with pytest.raises(InvalidInputError):
        CommunitySubnet([0], np.zeros((1, 1)))
    with pytest.raises(InvalidInputError):
        CommunitySubnet([0, 1], np.zeros((3, 3)))
    m = DissimilarityMatrix(np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]], float))
    s = CommunitySubnet.from_matrix(m, [2, 0])
    assert s.cardinality == 2 and s.weights.tolist() == [[0, 2], [2, 0]]


# --- experiment --------------------------------------------------------------------------------

def test_experiment_shape_and_determinism(tmp_path):
    c, m = generate_collection(GeneratorParams(prototype_pull=0.3), 200, 0)
    rows = run_prototype_experiment(c, m, "closeness")
    assert 1 <= len(rows) <= 6
    assert [r.cardinality for r in rows] == sorted(r.cardinality for r in rows)
    assert all(2 <= r.cardinality <= 7 for r in rows)
    assert rows == run_prototype_experiment(c, m, "closeness")
    path = tmp_path / "p.csv"
    write_prototype_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == PROTOTYPE_HEADER and len(lines) == len(rows) + 1


def test_experiment_skips_groups_without_original():
    w = np.full((7, 7), 0.5)
    np.fill_diagonal(w, 0)
    c = Collection([0, 0, 0, 1, 1, 1, 2], [True, False, False, False, False, False, False], np.ones(7))
    (row,) = run_prototype_experiment(c, DissimilarityMatrix(w), "closeness")
    assert (row.cardinality, row.trials) == (3, 1)
    assert row.ties == 1


def test_experiment_counts_match_manual_loop():
    c, m = generate_collection(GeneratorParams(prototype_pull=0.2), 120, 5)
    rows = {r.cardinality: r for r in run_prototype_experiment(c, m, "closeness", seed=2)}
    for size, r in rows.items():
        groups = [g for g in c.truth().groups() if g.size == size and c.is_original[g].any()]
        assert r.trials == len(groups)
        assert 0 <= r.hits <= r.trials


def test_mst_pairs_hit_half_the_time():
    hits = trials = 0
    for seed in range(8):
        c, m = generate_collection(GeneratorParams(prototype_pull=0.3), 250, seed)
        (row,) = run_prototype_experiment(c, m, "mst", cardinalities=[2], seed=seed)
        hits, trials = hits + row.hits, trials + row.trials
    assert trials >= 400
    assert abs(hits / trials - 0.5) <= 0.05


def test_experiment_errors():
    c, m = generate_collection(GeneratorParams(), 10, 0)
    with pytest.raises(InvalidInputError):
        run_prototype_experiment(c, m, "degree")
    with pytest.raises(InvalidInputError):
        run_prototype_experiment(c, m.submatrix(np.arange(5)), "mst")
    bare = Collection(c.group_of, np.zeros(c.n, bool), c.durations)
    with pytest.raises(InvalidInputError):
        run_prototype_experiment(bare, m, "closeness")
