"""Independent cross-checks, runnable from the command line.

Each suite returns a list of :class:`Check` rows. The reference side of every
check is computed by a different route than the code under test: brute-force
enumeration, finite differences, rejection sampling or exhaustive
classification.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .evaluation import clustering_coefficients, mmd_squared, orbit_counts_per_node
from .familiarity import brute_force_walk_table, path_counts
from .graph import Graph, bfs_order, largest_component, to_sequence
from .made import build_masks, made_forward
from .model import EncoderConfig, Gransformer
from .sampling import (
    TableDistribution,
    enumerate_ptilde,
    rejection_sample_oracle,
    sample_rows,
    sampler_law,
)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} {self.detail}".rstrip()


def random_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))


def random_connected_graph(rng, n: int, p: float) -> Graph:
    """Random spanning tree plus extra random edges."""
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.add((u, v))
    g = random_graph(rng, n, p)
    return Graph(n, frozenset(edges | set(g.edges)))


# walks -------------------------------------------------------------------------------


def suite_walks(seed: int = 7, n_graphs: int = 200, n_max: int = 12, k_max: int = 6) -> list[Check]:
    rng = np.random.default_rng(seed)
    matches = 0
    worst = ""
    t0 = time.perf_counter()
    for k in range(n_graphs):
        n = int(rng.integers(1, n_max + 1))
        g = random_graph(rng, n, float(rng.uniform(0.1, 0.45)))
        fast = path_counts(g.adjacency, k_max).mats
        slow = brute_force_walk_table(g, k_max)
        if np.array_equal(fast, slow.astype(np.float64)) and np.all(fast == np.round(fast)):
            matches += 1
        elif not worst:
            worst = f"first mismatch at graph {k} (n={n})"
    elapsed = time.perf_counter() - t0
    return [
        Check("walks.exact", matches == n_graphs, f"{matches}/{n_graphs} {worst}".strip()),
        Check("walks.runtime", elapsed <= 60.0, f"{elapsed:.1f}s"),
    ]


# zero-excluded sampler ----------------------------------------------------------------------------


def total_variation(a: np.ndarray, b: np.ndarray) -> float:
    length = a.shape[1]
    w = 1 << np.arange(length - 1, -1, -1, dtype=np.int64)
    ca = np.bincount(a.astype(np.int64) @ w, minlength=2**length) / len(a)
    cb = np.bincount(b.astype(np.int64) @ w, minlength=2**length) / len(b)
    return 0.5 * float(np.abs(ca - cb).sum())


def sampler_exact_gap(seed: int = 0, tables_per_length: int = 25, max_len: int = 4) -> float:
    """Largest coordinate gap between the sampler's law and the enumerated zero-excluded law."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for length in range(1, max_len + 1):
        for _ in range(tables_per_length):
            dist = TableDistribution.random(length, rng)
            law = sampler_law(dist)
            ref = enumerate_ptilde(dist)
            worst = max(worst, max(abs(law[y] - ref[y]) for y in ref))
    return worst


def sampler_vs_rejection(seed: int = 0, n_tables: int = 20, max_len: int = 10, draws: int = 100_000):
    """Per table: (length, TV between sampler and rejection draws, all-zero sampler outputs)."""
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(n_tables):
        length = 1 + k % max_len
        dist = TableDistribution.random(length, rng)
        ours = sample_rows(dist, rng, draws)
        ref, _ = rejection_sample_oracle(dist, rng, draws)
        rows.append((length, total_variation(ours, ref), int((~ours.any(axis=1)).sum())))
    return rows


def suite_zero_excluded(seed: int = 0) -> list[Check]:
    t0 = time.perf_counter()
    gap = sampler_exact_gap(seed)
    rows = sampler_vs_rejection(seed)
    elapsed = time.perf_counter() - t0
    tv = max(r[1] for r in rows)
    zeros = sum(r[2] for r in rows)
    return [
        Check("sampler.exact_law", gap <= 1e-12, f"max_gap={gap:.3g}"),
        Check("sampler.tv", tv <= 0.01, "tv=" + ",".join(f"{r[0]}:{r[1]:.4f}" for r in rows)),
        Check("sampler.no_zero_rows", zeros == 0, f"zero_rows={zeros}"),
        Check("sampler.runtime", elapsed <= 180.0, f"{elapsed:.1f}s"),
    ]


# MADE ---------------------------------------------------------------------------------


def made_reachability_ok(n_max: int, n_cond: int, hidden, seed) -> bool:
    masks = build_masks(n_max, n_cond, hidden, seed)
    reach = masks.reachability()
    expected = masks.in_tags[:, None] < masks.out_tags[None, :]
    return bool(np.array_equal(reach, expected))


def made_perturbation_ok(n_max: int = 10, seed: int = 0) -> bool:
    """Output ``j`` is bitwise unchanged by any change of target bits ``>= j``."""
    rng = np.random.default_rng(seed)
    n_cond = 6
    masks = build_masks(n_max, n_cond, (2 * n_max, 2 * n_max), seed)
    params = {}
    from .made import init_made

    init_made(params, masks, rng)
    for p in params.values():
        p.data += rng.normal(0, 0.3, p.data.shape).astype(p.data.dtype)
    h = rng.normal(size=n_cond - 2)
    bits = np.array([1.0, 0.0])
    for _ in range(5):
        base = (rng.random(n_max) < 0.5).astype(np.float64)
        p0 = made_forward(base, h, bits, masks, params)
        for j in range(n_max):
            for _ in range(4):
                other = base.copy()
                other[j:] = (rng.random(n_max - j) < 0.5)
                p1 = made_forward(other, h, bits, masks, params)
                if not np.array_equal(p0[: j + 1], p1[: j + 1]):
                    return False
    return True


def suite_made(seed: int = 0) -> list[Check]:
    ok = all(made_reachability_ok(n_max, 5, (2 * n_max, n_max + 3), s)
             for s in range(seed, seed + 50) for n_max in (2, 5, 10))
    return [
        Check("made.reachability", ok, "50 seeds x n_max in {2,5,10}"),
        Check("made.bitwise_invariance", made_perturbation_ok(10, seed), "n_max=10"),
    ]


# autoregressive leakage -----------------------------------------------------------------

FLAG_COMBOS = list(itertools.product((False, True), repeat=3))


def tiny_config(dual, fam, pos, **kw) -> EncoderConfig:
    base = dict(n_max=12, n_layers=2, d_hidden=32, n_k=6)
    base.update(kw)
    return EncoderConfig(use_dual_attention=dual, use_familiarity=fam, use_graph_pos_enc=pos, **base)


def leakage(model: Gransformer, g: Graph, pi, h: float = 1e-3) -> tuple[float, float]:
    """Max sensitivity of output positions ``<= r`` to row ``r``.

    Returns ``(bit_flip_max_change, finite_difference_max_slope)``. Bit flips
    change row, adjacency and every structural input together; finite
    differences move the continuous row values fed to the input projection.
    """
    seq = to_sequence(g, pi, model.config.n_max)
    rows = seq.rows.astype(np.float64)
    adj = seq.adjacency().astype(np.float64)
    n = g.n
    with T.no_grad():
        base = model.encode(model.prefix(rows, adj)).data
        flip = 0.0
        for r in range(1, n):
            for c in range(r):
                rr, aa = rows.copy(), adj.copy()
                rr[r, c] = 1 - rr[r, c]
                aa[r, c] = aa[c, r] = rr[r, c]
                out = model.encode(model.prefix(rr, aa)).data
                flip = max(flip, float(np.abs(out[: r + 1] - base[: r + 1]).max()))
        slope = 0.0
        pre = model.prefix(rows, adj)
        for r in range(n):
            for c in range(model.config.n_max):
                up, down = rows.copy(), rows.copy()
                up[r, c] += h
                down[r, c] -= h
                hu = model.encode(pre, T.Tensor(up)).data
                hd = model.encode(pre, T.Tensor(down)).data
                slope = max(slope, float(np.abs(hu[: r + 1] - hd[: r + 1]).max() / (2 * h)))
    return flip, slope


def suite_leakage(seed: int = 0, tol: float = 1e-6) -> list[Check]:
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 12, 0.25)
    pi = bfs_order(g, 0, rng)
    checks = []
    t0 = time.perf_counter()
    for dual, fam, pos in FLAG_COMBOS:
        with T.default_dtype(np.float64):
            model = Gransformer(tiny_config(dual, fam, pos), seed=seed)
        flip, slope = leakage(model, g, pi)
        name = f"leakage.dual={int(dual)},fam={int(fam)},pos={int(pos)}"
        checks.append(Check(name, flip <= tol and slope <= tol, f"flip={flip:.3g} fd={slope:.3g}"))
    elapsed = time.perf_counter() - t0
    checks.append(Check("leakage.runtime", elapsed <= 300.0, f"{elapsed:.1f}s"))
    return checks


# gradients -------------------------------------------------------------------------------


def gradcheck_model(seed: int = 0) -> tuple[Gransformer, np.ndarray]:
    """Small float64 model with every structural option on and a 5-node graph.

    Biases are jittered away from zero so that no ReLU sits exactly on its
    kink, where central differences are meaningless.
    """
    rng = np.random.default_rng(seed)
    with T.default_dtype(np.float64):
        model = Gransformer(EncoderConfig(n_max=6, n_layers=2, d_hidden=8, n_k=4), seed=seed)
    for p in model.parameters():
        p.data += rng.normal(0.0, 0.1, p.data.shape)
    g = Graph(5, frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (1, 4), (0, 2)}))
    rows = to_sequence(g, bfs_order(g, 0), 6).rows
    return model, rows


def suite_gradcheck(seed: int = 0, tol: float = 1e-3) -> list[Check]:
    model, rows = gradcheck_model(seed)
    report = T.grad_check(lambda: model.graph_nll(rows), model.parameters(), h=1e-3)
    worst = max(report, key=report.get)
    return [Check("gradcheck.full_loss", report[worst] <= tol, f"worst={worst}:{report[worst]:.3g}")]


# evaluation --------------------------------------------------------------------------------

_REFERENCE_GRAPHLETS = [
    (2, [(0, 1)], [0, 0]),
    (3, [(0, 1), (1, 2)], [1, 2, 1]),
    (3, [(0, 1), (1, 2), (0, 2)], [3, 3, 3]),
    (4, [(0, 1), (1, 2), (2, 3)], [4, 5, 5, 4]),
    (4, [(0, 1), (0, 2), (0, 3)], [7, 6, 6, 6]),
    (4, [(0, 1), (1, 2), (2, 3), (0, 3)], [8, 8, 8, 8]),
    (4, [(0, 1), (1, 2), (0, 2), (2, 3)], [10, 10, 11, 9]),
    (4, [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], [12, 12, 13, 13]),
    (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], [14, 14, 14, 14]),
]


def exhaustive_orbits(g: Graph) -> np.ndarray:
    """Per-node orbit counts by matching every node subset against reference
    graphlets under all relabellings."""
    adj = g.adjacency
    counts = np.zeros((g.n, 15), dtype=np.int64)
    for k in (2, 3, 4):
        for sub in itertools.combinations(range(g.n), k):
            edges = {(a, b) for a, b in itertools.combinations(range(k), 2) if adj[sub[a], sub[b]]}
            matched = False
            for size, ref_edges, orbits in _REFERENCE_GRAPHLETS:
                if size != k or len(ref_edges) != len(edges):
                    continue
                ref = {tuple(sorted(e)) for e in ref_edges}
                for perm in itertools.permutations(range(k)):
                    if {tuple(sorted((perm[a], perm[b]))) for a, b in edges} == ref:
                        for a in range(k):
                            counts[sub[a], orbits[perm[a]]] += 1
                        matched = True
                        break
                if matched:
                    break
    return counts


def triangle_clustering(g: Graph) -> np.ndarray:
    adj = g.adjacency
    c = np.zeros(g.n)
    for v in range(g.n):
        nb = [u for u in range(g.n) if adj[v, u]]
        if len(nb) < 2:
            continue
        tri = sum(1 for a, b in itertools.combinations(nb, 2) if adj[a, b])
        c[v] = tri / (len(nb) * (len(nb) - 1) / 2)
    return c


def suite_orbits(seed: int = 0, n_graphs: int = 100) -> list[Check]:
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(n_graphs):
        g = random_graph(rng, int(rng.integers(1, 9)), float(rng.uniform(0.15, 0.8)))
        ok += np.array_equal(orbit_counts_per_node(g), exhaustive_orbits(g))
    return [Check("orbits.exhaustive", ok == n_graphs, f"{ok}/{n_graphs}")]


def suite_clustering(seed: int = 0, n_graphs: int = 100) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_graphs):
        g = random_graph(rng, int(rng.integers(1, 9)), float(rng.uniform(0.15, 0.8)))
        worst = max(worst, float(np.abs(clustering_coefficients(g) - triangle_clustering(g)).max(initial=0)))
    return [Check("clustering.triangles", worst <= 1e-12, f"max_err={worst:.3g}")]


def suite_mmd(seed: int = 0, n_sets: int = 10) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_sets):
        size = int(rng.integers(1, 12))
        hists = [rng.dirichlet(np.ones(int(rng.integers(2, 9)))) for _ in range(size)]
        vecs = [rng.normal(size=15) for _ in range(size)]
        worst = max(worst, abs(mmd_squared(hists, hists)[0]), abs(mmd_squared(vecs, vecs, kind="vector")[0]))
    return [Check("mmd.self_zero", worst <= 1e-12, f"max_abs={worst:.3g}")]


SUITES = {
    "walks": suite_walks,
    "theorem1": suite_zero_excluded,
    "made": suite_made,
    "leakage": suite_leakage,
    "gradcheck": suite_gradcheck,
    "orbits": suite_orbits,
    "clustering": suite_clustering,
    "mmd": suite_mmd,
}
