import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gransformer import tensor as T
from gransformer.familiarity import (
    brute_force_walk_counts,
    brute_force_walk_table,
    familiarity_matrix,
    init_familiarity_net,
    init_positional,
    pair_features,
    path_counts,
    positional_encoding,
    positional_features,
)
from gransformer.graph import Graph
from gransformer.layers import mlp2
from gransformer.oracles import random_graph

PATH3 = Graph(3, frozenset({(0, 1), (1, 2)}))
TRIANGLE = Graph(3, frozenset({(0, 1), (1, 2), (0, 2)}))


@st.composite
def graphs(draw, n_max=12):
    n = draw(st.integers(1, n_max))
    return random_graph(np.random.default_rng(draw(st.integers(0, 2**31))), n, draw(st.floats(0, 0.7)))


def test_m0_is_identity():
    g = random_graph(np.random.default_rng(0), 7, 0.4)
    assert np.array_equal(path_counts(g.adjacency, 3).mats[0], np.eye(7))


def test_path_two_step_counts():
    m = path_counts(PATH3.adjacency, 2).mats
    assert m[2, 1, 1] == 1  # 1 -> 0 -> 1 inside {0, 1}
    assert m[2, 0, 0] == 0  # {0} has no edges
    assert brute_force_walk_counts(PATH3, 1, 1, 2) == 1


def test_triangle_three_step_count():
    assert path_counts(TRIANGLE.adjacency, 3).mats[3, 0, 2] == 3
    assert brute_force_walk_counts(TRIANGLE, 0, 2, 3) == 3


def test_brute_force_base_cases():
    g = random_graph(np.random.default_rng(1), 6, 0.5)
    a = g.adjacency
    for i in range(6):
        for j in range(6):
            assert brute_force_walk_counts(g, i, j, 0) == int(i == j)
            assert brute_force_walk_counts(g, i, j, 1) == (int(a[i, j]) if i <= j else 0)


def test_brute_force_caps():
    with pytest.raises(ValueError):
        brute_force_walk_counts(Graph(13), 0, 0, 1)
    with pytest.raises(ValueError):
        brute_force_walk_counts(PATH3, 0, 0, 9)


def test_matches_brute_force_on_200_instances():
    rng = np.random.default_rng(2)
    for _ in range(200):
        g = random_graph(rng, int(rng.integers(1, 13)), float(rng.uniform(0.1, 0.6)))
        i, j = sorted(rng.integers(g.n, size=2).tolist())
        k = int(rng.integers(0, 7))
        assert path_counts(g.adjacency, k).mats[k, i, j] == brute_force_walk_counts(g, i, j, k)


def test_saturation_keeps_counts_finite():
    n = 12
    complete = np.ones((n, n)) - np.eye(n)
    st_ = path_counts(complete, 400)
    assert np.all(np.isfinite(st_.mats)) and np.all(np.isfinite(st_.logs))
    assert st_.mats.max() == 1e300


def _fam_params(n_k=4, width=6, seed=0):
    p = {}
    init_familiarity_net(p, "fam", n_k, width, np.random.default_rng(seed))
    return p


def test_lower_pairs_share_constant():
    g = random_graph(np.random.default_rng(3), 6, 0.5)
    fam = familiarity_matrix(pair_features(path_counts(g.adjacency, 4)), _fam_params(), "fam").data
    low = fam[np.tril_indices(7, -1)]
    assert np.all(low == low[0])


def test_zero_network_gives_half():
    p = _fam_params()
    for t in p.values():
        t.data[:] = 0
    g = random_graph(np.random.default_rng(4), 5, 0.5)
    fam = familiarity_matrix(pair_features(path_counts(g.adjacency, 4)), p, "fam").data
    assert np.all(fam == 0.5)


def test_familiarity_gradient(f64):
    p = _fam_params()
    rng = np.random.default_rng(5)
    for t in p.values():
        t.data += rng.normal(0, 0.1, t.data.shape)
    feats = pair_features(path_counts(random_graph(rng, 6, 0.5).adjacency, 4))
    # small step: with 49 pairs some ReLU input sits within 1e-3 of its kink
    report = T.grad_check(lambda: T.total(familiarity_matrix(feats, p, "fam")), list(p.values()), h=1e-5)
    assert max(report.values()) <= 1e-4, report


def _pos_params(n_max=8, n_k=3, seed=0):
    p = {}
    init_positional(p, n_max, n_k, 5, 4, 12, np.random.default_rng(seed))
    return p


def test_first_node_edgeless_prefix_pos_enc():
    n_max, n_k = 8, 3
    p = _pos_params(n_max, n_k)
    stack = path_counts(np.zeros((1, 1)), n_k)
    out = positional_encoding(positional_features(stack, n_max), p, 1).data[0]
    # log 2 at length 0 is the only nonzero input, longer walks are all zero
    x = np.zeros((n_k + 1, n_max))
    x[0, 0] = np.log(2.0)
    h = mlp2(p, "pos.col", T.Tensor(x), out_act=T.sigmoid).data.reshape(1, -1)
    expected = h @ p["pos.mix.w"].data + p["pos.mix.b"].data
    np.testing.assert_allclose(out, expected[0], rtol=1e-6)


def test_shared_prefix_gives_identical_pos_enc():
    rng = np.random.default_rng(6)
    g = random_graph(rng, 9, 0.4)
    a1 = g.adjacency.astype(float)
    a2 = a1.copy()
    # rewire everything after node 4
    a2[5:, :] = 0
    a2[:, 5:] = 0
    new = (rng.random((4, 5)) < 0.5).astype(float)
    a2[5:, :5] = new
    a2[:5, 5:] = new.T
    p = _pos_params(10, 3)
    outs = [positional_encoding(positional_features(path_counts(a, 3), 10), p, 9).data for a in (a1, a2)]
    assert np.array_equal(outs[0][:5], outs[1][:5])


def test_pos_enc_gradient(f64):
    p = _pos_params(8, 3)
    rng = np.random.default_rng(7)
    for t in p.values():
        t.data += rng.normal(0, 0.1, t.data.shape)
    feats = positional_features(path_counts(random_graph(rng, 6, 0.5).adjacency, 3), 8)
    w = T.Tensor(rng.normal(size=(6, 12)))
    report = T.grad_check(lambda: T.total(T.mul(positional_encoding(feats, p, 6), w)), list(p.values()))
    assert max(report.values()) <= 1e-4, report


@settings(max_examples=40, deadline=None)
@given(graphs())
def test_walk_counts_equal_enumeration(g):
    fast = path_counts(g.adjacency, 6).mats
    assert np.array_equal(fast, brute_force_walk_table(g, 6).astype(float))


@settings(max_examples=40, deadline=None)
@given(graphs())
def test_stack_invariants(g):
    st_ = path_counts(g.adjacency, 5)
    a = g.adjacency.astype(float)
    for k in range(1, 6):
        assert np.array_equal(st_.mats[k], np.triu(st_.mats[k]))
        assert np.array_equal(st_.mats[k], np.triu(a @ st_.mats[k - 1]))
    assert np.all(st_.logs >= 0)


@settings(max_examples=30, deadline=None)
@given(graphs(), st.integers(0, 2**31))
def test_counts_ignore_later_edges(g, seed):
    """Flipping A(u, v) with max(u, v) > j leaves columns 0..j untouched."""
    rng = np.random.default_rng(seed)
    if g.n < 2:
        return
    j = int(rng.integers(0, g.n - 1))
    v = int(rng.integers(j + 1, g.n))
    u = int(rng.integers(0, v))
    a = g.adjacency.astype(float)
    b = a.copy()
    b[u, v] = b[v, u] = 1 - b[u, v]
    p = _fam_params(4)
    pos = _pos_params(12, 4)
    sa, sb = path_counts(a, 4), path_counts(b, 4)
    assert np.array_equal(sa.mats[:, :, : j + 1], sb.mats[:, :, : j + 1])
    fa = familiarity_matrix(pair_features(sa), p, "fam").data
    fb = familiarity_matrix(pair_features(sb), p, "fam").data
    assert np.array_equal(fa[:, : j + 2], fb[:, : j + 2])  # position j+1 is node j
    pa = positional_encoding(positional_features(sa, 12), pos, g.n).data
    pb = positional_encoding(positional_features(sb, 12), pos, g.n).data
    assert np.array_equal(pa[: j + 1], pb[: j + 1])


@settings(max_examples=30, deadline=None)
@given(graphs())
def test_familiarity_strictly_inside_unit_interval(g):
    fam = familiarity_matrix(pair_features(path_counts(g.adjacency, 4)), _fam_params(), "fam").data
    assert np.all((fam > 0) & (fam < 1))


@settings(max_examples=30, deadline=None)
@given(graphs())
def test_adding_edge_does_not_decrease_one_step_count(g):
    if g.n < 2:
        return
    for j in range(1, g.n):
        a = g.adjacency.astype(float)
        before = path_counts(a, 1).mats[1, j - 1, j]
        a[j - 1, j] = a[j, j - 1] = 1
        assert path_counts(a, 1).mats[1, j - 1, j] >= before
