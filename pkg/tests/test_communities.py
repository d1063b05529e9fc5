import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import block_matrix, planted_matrix, random_ugraph
from covernet.communities import (
    CommunityConfig,
    PassStats,
    detect_mo,
    detect_pm1,
    detect_pm2,
    detect_pm3,
    louvain,
    margin_pairs,
    mo_network,
    modularity,
    pm1_network,
    triangle_objective,
)
from covernet.errors import InvalidInputError
from covernet.evaluation import per_song_f
from covernet.graph import DissimilarityMatrix, Network
from covernet.partition import Partition


def modularity_oracle(g, labels):
    a = g.to_csr(symmetric=True).toarray()
    k = a.sum(axis=1)
    two_m = a.sum()
    q = 0.0
    for i in range(g.n):
        for j in range(g.n):
            if labels[i] == labels[j]:
                q += a[i, j] - k[i] * k[j] / two_m
    return q / two_m


def triple_counts(adj, i, j):
    """Common and exclusive neighbours of (i, j) by scanning every third node."""
    common = exclusive = 0
    for k in range(len(adj)):
        if k in (i, j):
            continue
        ik, jk = k in adj[i], k in adj[j]
        common += ik and jk
        exclusive += ik != jk
    return common, exclusive


def f_global(adj, alpha):
    """N_closed - alpha * N_open over every node triple."""
    closed = opened = 0
    for a, b, c in itertools.combinations(range(len(adj)), 3):
        e = (b in adj[a]) + (c in adj[a]) + (c in adj[b])
        closed += e == 3
        opened += e == 2
    return closed - alpha * opened


def adj_from(n, edges):
    adj = [set() for _ in range(n)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


# --- configuration ------------------------------------------------------------------

@pytest.mark.parametrize(
    "kw",
    [dict(w_th=0), dict(w_th=0.5, r_th=0), dict(w_th=0.5, alpha=-1), dict(w_th=0.5, margin=-0.1),
     dict(w_th=0.5, mo_weighting="log")],
)
def test_config_validation(kw):
    with pytest.raises(InvalidInputError):
        CommunityConfig(**kw)


# --- modularity ----------------------------------------------------------------------

def test_modularity_single_community_is_zero(rng):
    g = random_ugraph(10, 0.4, rng)
    assert modularity(g, Partition.single_group(10)) == pytest.approx(0.0, abs=1e-15)


def test_modularity_two_cliques():
    edges = [(a, b, 1.0) for c in (range(4), range(4, 8)) for a, b in itertools.combinations(c, 2)]
    g = Network.from_edges(8, edges, directed=False)
    p = Partition([0] * 4 + [1] * 4)
    assert modularity(g, p) == pytest.approx(0.5, abs=1e-15)
    assert modularity(g, p) == pytest.approx(modularity_oracle(g, p.assignment), abs=1e-15)


def test_modularity_random_partitions(rng):
    for _ in range(20):
        g = random_ugraph(10, 0.4, rng)
        if g.edge_count == 0:
            continue
        labels = rng.integers(0, 3, 10)
        for weighted in (True, False):
            gg = g if weighted else Network(g.n, g.sources, g.targets, np.ones(g.edge_count), False)
            assert modularity(g, Partition(labels), weighted) == pytest.approx(
                modularity_oracle(gg, Partition(labels).assignment), abs=1e-12
            )


def test_modularity_errors():
    with pytest.raises(InvalidInputError):
        modularity(Network.from_edges(3, []), Partition.singletons(3))
    with pytest.raises(InvalidInputError):
        modularity(Network.from_edges(3, [(0, 1, 1.0)]), Partition.singletons(3))


# --- MO ----------------------------------------------------------------------------------

def test_mo_two_cliques_weak_bridge():
    m, labels = block_matrix([4, 4], intra=0.1, inter=0.9)
    w = m.weights.copy()
    w[3, 4] = w[4, 3] = 0.6  # above the threshold
    assert detect_mo(DissimilarityMatrix(w), CommunityConfig(w_th=0.5)) == Partition(labels)


def test_mo_planted_five_communities(rng):
    m, labels = planted_matrix([5] * 5, rng, intra=0.25, inter=0.75, sd=0.08)
    p = detect_mo(m, CommunityConfig(w_th=0.45))
    assert per_song_f(p, Partition(labels)).f >= 0.9


def test_mo_empty_graph_singletons(rng):
    m, _ = block_matrix([3, 3], intra=0.6, inter=0.9)
    assert detect_mo(m, CommunityConfig(w_th=0.5)) == Partition.singletons(6)


def test_mo_improves_on_singletons(rng):
    for _ in range(10):
        m, _ = planted_matrix([6, 5, 7, 4], rng, intra=0.35, inter=0.6, sd=0.15)
        cfg = CommunityConfig(w_th=0.5)
        g = mo_network(m, cfg)
        if g.weights.sum() == 0:
            continue
        assert modularity(g, detect_mo(m, cfg)) >= modularity(g, Partition.singletons(m.n)) - 1e-12


def test_louvain_ring_of_cliques():
    cliques = [range(k * 5, k * 5 + 5) for k in range(6)]
    edges = [(a, b, 1.0) for c in cliques for a, b in itertools.combinations(c, 2)]
    edges += [(k * 5 + 4, ((k + 1) % 6) * 5, 1.0) for k in range(6)]
    edges = [(min(a, b), max(a, b), w) for a, b, w in edges]
    p = louvain(Network.from_edges(30, edges, directed=False))
    assert p == Partition(np.repeat(np.arange(6), 5))


@pytest.mark.parametrize("mode", ["linear", "inverse", "unweighted"])
def test_mo_weighting_modes(mode):
    m, labels = block_matrix([3, 4], intra=0.2, inter=0.9)
    g = mo_network(m, CommunityConfig(w_th=0.5, mo_weighting=mode))
    assert (g.weights > 0).all()
    assert detect_mo(m, CommunityConfig(w_th=0.5, mo_weighting=mode)) == Partition(labels)


# --- PM1 ------------------------------------------------------------------------------------

def test_pm1_all_above_threshold():
    m, _ = block_matrix([3, 3], intra=0.6, inter=0.9)
    assert detect_pm1(m, CommunityConfig(w_th=0.5)) == Partition.singletons(6)


def test_pm1_two_blobs():
    m, labels = block_matrix([4, 5], intra=0.2, inter=0.8)
    assert detect_pm1(m, CommunityConfig(w_th=0.5, r_th=1)) == Partition(labels)


def test_pm1_relabeling_invariance(rng):
    for _ in range(10):
        m, _ = planted_matrix([4, 3, 5, 2], rng, intra=0.35, inter=0.6, sd=0.15)
        perm = rng.permutation(m.n)
        cfg = CommunityConfig(w_th=0.45, r_th=2)
        a = detect_pm1(m, cfg).assignment
        b = detect_pm1(m.submatrix(perm), cfg).assignment
        assert Partition(a[perm]) == Partition(b)


# --- triangle objective ------------------------------------------------------------------

def test_triangle_closure_and_deletion_cases():
    # closure: i, j share one neighbour, nothing else
    g = Network.from_edges(3, [(0, 2, 1.0), (1, 2, 1.0)], directed=False)
    assert triangle_objective(g, 0, 1, 1.0) == (1.0, -1.0)
    # deletion: no common, two exclusive
    g = Network.from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0)], directed=False)
    assert triangle_objective(g, 0, 1, 1.0) == (-2.0, 0.0)
    with pytest.raises(InvalidInputError):
        triangle_objective(g, 1, 1, 1.0)


def test_triangle_objective_exhaustive_small_graphs():
    # every graph on 5 nodes, every pair
    pairs = list(itertools.combinations(range(5), 2))
    for mask in range(1 << len(pairs)):
        adj = adj_from(5, [p for b, p in enumerate(pairs) if mask >> b & 1])
        for i, j in pairs:
            c, e = triple_counts(adj, i, j)
            assert triangle_objective(adj, i, j, 0.7) == (c - 0.7 * e, -0.7 * c)


def test_triangle_objective_random_eight_nodes(rng):
    for _ in range(100):
        n = int(rng.integers(3, 9))
        g = random_ugraph(n, rng.uniform(0.1, 0.9), rng)
        adj = g.neighbor_sets()
        alpha = float(rng.uniform(0, 2))
        for i, j in itertools.combinations(range(n), 2):
            c, e = triple_counts(adj, i, j)
            assert triangle_objective(g, i, j, alpha) == pytest.approx((c - alpha * e, -alpha * c), abs=1e-12)


def test_local_score_equals_global_change(rng):
    for _ in range(40):
        n = 7
        adj = random_ugraph(n, 0.4, rng).neighbor_sets()
        alpha = float(rng.uniform(0, 2))
        i, j = sorted(rng.choice(n, 2, replace=False).tolist())
        on = [set(a) for a in adj]
        on[i].add(j), on[j].add(i)
        off = [set(a) for a in adj]
        off[i].discard(j), off[j].discard(i)
        f_with, f_without = triangle_objective(adj, i, j, alpha)
        assert f_global(on, alpha) - f_global(off, alpha) == pytest.approx(f_with - f_without, abs=1e-9)


# --- PM2 / PM3 ------------------------------------------------------------------------------

def wedge_matrix():
    # centre a=2 close to b=0 and c=1; b and c far apart
    w = np.array([[0, 0.9, 0.2], [0.9, 0, 0.2], [0.2, 0.2, 0]])
    return DissimilarityMatrix(w)


def test_pm2_closes_open_wedge():
    cfg = CommunityConfig(w_th=0.5, r_th=2, alpha=0.5)
    stats = PassStats()
    p = detect_pm2(wedge_matrix(), cfg, stats)
    assert stats.added == 1 and stats.removed == 0
    assert p == Partition.single_group(3)


def test_pm2_noop_on_cliques():
    m, labels = block_matrix([4, 3, 5], intra=0.2, inter=0.9)
    stats = PassStats()
    p = detect_pm2(m, CommunityConfig(w_th=0.5, r_th=10, alpha=1.0), stats)
    assert stats.added == stats.removed == 0
    assert p == Partition(labels)


def naive_pm2(m, cfg):
    """Lexicographic pass over every pair of the pruned graph without candidate filtering."""
    adj = pm1_network(m, cfg).neighbor_sets()
    for i, j in itertools.combinations(range(m.n), 2):
        f_with, f_without = triangle_objective(adj, i, j, cfg.alpha)
        if f_with > f_without:
            adj[i].add(j), adj[j].add(i)
        elif f_without > f_with:
            adj[i].discard(j), adj[j].discard(i)
    edges = [(i, j, 1.0) for i in range(m.n) for j in adj[i] if i < j]
    from covernet.graph import connected_components

    return connected_components(Network.from_edges(m.n, edges, directed=False))


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
@settings(max_examples=40, deadline=None)
def test_pm2_candidate_restriction_is_exact(seed, alpha):
    rng = np.random.default_rng(seed)
    m, _ = planted_matrix([4, 3, 5, 3], rng, intra=0.35, inter=0.6, sd=0.15)
    cfg = CommunityConfig(w_th=0.45, r_th=2, alpha=alpha)
    assert detect_pm2(m, cfg) == naive_pm2(m, cfg)


def test_pm2_not_far_below_pm1(rng):
    for _ in range(10):
        m, labels = planted_matrix([5] * 6, rng, intra=0.3, inter=0.7, sd=0.12)
        cfg = CommunityConfig(w_th=0.45, r_th=3, alpha=0.5)
        truth = Partition(labels)
        assert per_song_f(detect_pm2(m, cfg), truth).f >= per_song_f(detect_pm1(m, cfg), truth).f - 0.05


def test_pm2_deletes_sparse_chains():
    # a path carries no triangles, so with alpha > 0 every edge scores f_with < f_without
    w = np.full((4, 4), 0.9)
    np.fill_diagonal(w, 0)
    for a, b in ((0, 1), (1, 2), (2, 3)):
        w[a, b] = w[b, a] = 0.2
    p = detect_pm2(DissimilarityMatrix(w), CommunityConfig(w_th=0.5, r_th=1, alpha=1.0))
    assert p.group_count > 1


def test_pm2_fixpoint_converges(rng):
    m, _ = planted_matrix([5] * 6, rng, intra=0.35, inter=0.6, sd=0.15)
    stats = PassStats()
    detect_pm2(m, CommunityConfig(w_th=0.45, alpha=0.5, pm2_fixpoint=True), stats)
    assert 1 <= stats.passes <= 10


def test_pm3_reductions(rng):
    for _ in range(10):
        m, _ = planted_matrix([4, 5, 3, 6], rng, intra=0.35, inter=0.6, sd=0.15)
        cfg = CommunityConfig(w_th=0.45, r_th=2, alpha=1.0)
        assert detect_pm3(m, CommunityConfig(**{**cfg.__dict__, "margin": 0.0})) == detect_pm1(m, cfg)
        assert detect_pm3(m, CommunityConfig(**{**cfg.__dict__, "margin": np.inf})) == detect_pm2(m, cfg)


def test_margin_pairs_strict():
    # dyadic values so the boundary pairs sit exactly at distance 0.25
    m = DissimilarityMatrix(np.array([[0, 0.25, 0.5], [0.25, 0, 0.75], [0.5, 0.75, 0]]))
    assert [r.tolist() for r in margin_pairs(m, 0.5, 0.25)] == [[2], [], []]
    assert [r.tolist() for r in margin_pairs(m, 0.5, 0.0)] == [[], [], []]


def test_pm3_visits_subset_of_pm2(rng):
    m, _ = planted_matrix([5] * 6, rng, intra=0.35, inter=0.6, sd=0.15)
    cfg = CommunityConfig(w_th=0.45, r_th=2, alpha=1.0, margin=0.05)
    s2, s3 = PassStats(), PassStats()
    detect_pm2(m, cfg, s2)
    detect_pm3(m, cfg, s3)
    assert 0 < s3.visited < s2.visited


def best_time(fn, *args):
    out = []
    for _ in range(3):
        t0 = time.perf_counter()
        fn(*args)
        out.append(time.perf_counter() - t0)
    return min(out)


def test_pm3_cheaper_than_pm2_at_500(rng):
    m, _ = planted_matrix(rng.integers(2, 8, 120).tolist(), rng, intra=0.4, inter=0.7, sd=0.12)
    m = m.submatrix(np.arange(500))
    cfg = CommunityConfig(w_th=0.5, r_th=10, alpha=1.0, margin=0.05)
    s2, s3 = PassStats(), PassStats()
    detect_pm2(m, cfg, s2)
    detect_pm3(m, cfg, s3)
    assert s3.visited < s2.visited
    assert best_time(detect_pm3, m, cfg) < best_time(detect_pm2, m, cfg)


def test_detectors_return_valid_partitions(rng):
    m, _ = planted_matrix([3, 4, 5], rng, intra=0.35, inter=0.6, sd=0.15)
    cfg = CommunityConfig(w_th=0.45)
    for fn in (detect_mo, detect_pm1, detect_pm2, detect_pm3):
        p = fn(m, cfg)
        assert p.n == m.n
        assert set(p.assignment.tolist()) == set(range(p.group_count))
