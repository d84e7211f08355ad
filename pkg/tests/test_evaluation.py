import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gransformer.evaluation import (
    ORBIT_CAP,
    clustering_coefficients,
    clustering_histogram,
    degree_histogram,
    format_report_csv,
    mmd_report,
    mmd_squared,
    orbit_counts,
    orbit_counts_per_node,
    parse_report_csv,
    wasserstein_1d,
)
from gransformer.graph import Graph
from gransformer.oracles import exhaustive_orbits, random_graph, triangle_clustering

CYCLE5 = Graph(5, frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)}))
STAR = Graph(4, frozenset({(0, 1), (0, 2), (0, 3)}))
K4 = Graph(4, frozenset(itertools.combinations(range(4), 2)))
P4 = Graph(4, frozenset({(0, 1), (1, 2), (2, 3)}))


@st.composite
def graphs(draw, n_max=8):
    n = draw(st.integers(1, n_max))
    return random_graph(np.random.default_rng(draw(st.integers(0, 2**31))), n, draw(st.floats(0, 0.9)))


def test_cycle_degree_point_mass():
    assert degree_histogram(CYCLE5).tolist() == [0, 0, 1.0]


def test_star_degrees():
    h = degree_histogram(STAR)
    assert h[1] == 0.75 and h[3] == 0.25 and h.sum() == 1.0


def test_degree_histogram_recount():
    g = random_graph(np.random.default_rng(0), 15, 0.3)
    a = g.adjacency
    deg = [int(sum(a[v])) for v in range(15)]
    h = degree_histogram(g)
    for d in range(len(h)):
        assert h[d] == deg.count(d) / 15


def test_triangle_and_tree_clustering():
    tri = Graph(3, frozenset({(0, 1), (1, 2), (0, 2)}))
    assert clustering_coefficients(tri).tolist() == [1.0, 1.0, 1.0]
    assert not clustering_coefficients(STAR).any()
    assert clustering_histogram(tri)[-1] == 1.0


def test_clustering_matches_triangle_enumeration_and_networkx():
    rng = np.random.default_rng(1)
    for _ in range(50):
        g = random_graph(rng, int(rng.integers(1, 9)), float(rng.uniform(0.1, 0.9)))
        ours = clustering_coefficients(g)
        np.testing.assert_allclose(ours, triangle_clustering(g), atol=1e-12)
        nxg = nx.Graph(list(g.edges))
        nxg.add_nodes_from(range(g.n))
        np.testing.assert_allclose(ours, [nx.clustering(nxg)[v] for v in range(g.n)], atol=1e-12)


def test_k4_orbits():
    counts = orbit_counts_per_node(K4)
    assert np.all(counts[:, 14] == 1)
    # smaller graphlets are counted too: 3 edges and 3 triangles per node
    assert np.all(counts[:, 0] == 3) and np.all(counts[:, 3] == 3)
    assert not counts[:, 4:14].any()


def test_p4_orbits():
    counts = orbit_counts_per_node(P4)
    assert counts[:, 4].tolist() == [1, 0, 0, 1]
    assert counts[:, 5].tolist() == [0, 1, 1, 0]
    assert not counts[:, 6:].any()


def _networkx_orbits(g: Graph) -> np.ndarray:
    """Orbit counts by isomorphism matching against reference graphlets with networkx."""
    from gransformer.oracles import _REFERENCE_GRAPHLETS

    refs = []
    for size, edges, orbits in _REFERENCE_GRAPHLETS:
        h = nx.Graph(edges)
        h.add_nodes_from(range(size))
        refs.append((h, orbits))
    full = nx.Graph(list(g.edges))
    full.add_nodes_from(range(g.n))
    out = np.zeros((g.n, 15), dtype=np.int64)
    for k in (2, 3, 4):
        for sub in itertools.combinations(range(g.n), k):
            s = full.subgraph(sub)
            if not nx.is_connected(s):
                continue
            for h, orbits in refs:
                gm = nx.algorithms.isomorphism.GraphMatcher(s, h)
                if gm.is_isomorphic():
                    for v, r in gm.mapping.items():
                        out[v, orbits[r]] += 1
                    break
    return out


def test_orbits_match_two_independent_classifiers():
    rng = np.random.default_rng(2)
    for _ in range(100):
        g = random_graph(rng, int(rng.integers(1, 9)), float(rng.uniform(0.15, 0.8)))
        ours = orbit_counts_per_node(g)
        assert np.array_equal(ours, exhaustive_orbits(g))
        assert np.array_equal(ours, _networkx_orbits(g))


def test_orbit_cap():
    with pytest.raises(ValueError, match="cap"):
        orbit_counts_per_node(Graph(ORBIT_CAP + 1))


def test_mmd_identical_sets_zero():
    rng = np.random.default_rng(3)
    s = [rng.dirichlet(np.ones(5)) for _ in range(6)]
    assert abs(mmd_squared(s, s)[0]) <= 1e-12


def test_mmd_singletons_closed_form():
    a, b = np.array([1.0, 0, 0, 0]), np.array([0, 0, 0, 1.0])
    sigma = 1.5
    d = wasserstein_1d(a, b)
    assert d == 3.0
    val, _ = mmd_squared([a], [b], sigma=sigma)
    assert val == pytest.approx(2 - 2 * math.exp(-(d**2) / (2 * sigma**2)), abs=1e-15)


def test_mmd_two_element_sets_by_hand():
    a = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    b = [np.array([0.5, 0.5]), np.array([1.0, 0.0])]
    sigma = 1.0

    def k(x, y):
        return math.exp(-wasserstein_1d(x, y) ** 2 / 2)

    kaa = sum(k(x, y) for x in a for y in a) / 4
    kbb = sum(k(x, y) for x in b for y in b) / 4
    kab = sum(k(x, y) for x in a for y in b) / 4
    assert mmd_squared(a, b, sigma=sigma)[0] == pytest.approx(kaa + kbb - 2 * kab, abs=1e-15)


def test_report_columns_and_csv_round_trip():
    rng = np.random.default_rng(4)
    a = [random_graph(rng, 7, 0.4) for _ in range(5)]
    b = [random_graph(rng, 8, 0.3) for _ in range(4)]
    rep = mmd_report(a, b)
    assert [e.statistic for e in rep] == ["deg", "clus", "orbit"]
    assert parse_report_csv(format_report_csv(rep)) == rep


def test_report_same_set_all_zero():
    rng = np.random.default_rng(5)
    a = [random_graph(rng, 7, 0.4) for _ in range(5)]
    assert all(abs(e.mmd2) <= 1e-12 for e in mmd_report(a, a))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1), min_size=1, max_size=6), min_size=1, max_size=5),
       st.lists(st.lists(st.floats(0, 1), min_size=1, max_size=6), min_size=1, max_size=5),
       st.sampled_from(["hist", "vector"]))
def test_mmd_symmetric_bitwise(xs, ys, kind):
    if kind == "vector":
        xs = [(x + [0] * 6)[:6] for x in xs]
        ys = [(y + [0] * 6)[:6] for y in ys]
    xs = [np.array(x) for x in xs]
    ys = [np.array(y) for y in ys]
    assert mmd_squared(xs, ys, kind=kind) == mmd_squared(ys, xs, kind=kind)
    assert abs(mmd_squared(xs, xs, kind=kind)[0]) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(graphs(), st.integers(0, 2**31))
def test_statistics_invariant_under_relabelling(g, seed):
    h = g.permute(np.random.default_rng(seed).permutation(g.n))
    assert np.array_equal(degree_histogram(g), degree_histogram(h))
    assert np.array_equal(clustering_histogram(g), clustering_histogram(h))
    assert np.array_equal(orbit_counts(g), orbit_counts(h))
