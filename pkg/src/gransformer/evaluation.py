"""Graph statistics and MMD scores between sets of graphs.

Degree and clustering statistics are normalised histograms compared with a
Gaussian kernel over the 1-Wasserstein distance. Orbit statistics are the mean
per-node counts of the 15 node orbits of connected graphlets on 2-4 nodes
(standard numbering 0-14), compared with a Gaussian kernel over Euclidean
distance after per-dimension standardisation. The estimator is the biased
one, diagonal terms included.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import Graph

N_ORBITS = 15
ORBIT_CAP = 500
CLUSTERING_BINS = 100
STATISTICS = ("deg", "clus", "orbit")


def degree_histogram(g: Graph, length: int | None = None) -> np.ndarray:
    deg = g.degrees()
    size = max(length or 0, int(deg.max()) + 1 if g.n else 1)
    hist = np.bincount(deg, minlength=size).astype(np.float64)
    return hist / hist.sum() if hist.sum() else hist


def clustering_coefficients(g: Graph) -> np.ndarray:
    a = g.adjacency.astype(np.int64)
    deg = a.sum(axis=1)
    tri = np.einsum("ij,jk,ki->i", a, a, a) // 2
    c = np.zeros(g.n)
    ok = deg >= 2
    c[ok] = 2.0 * tri[ok] / (deg[ok] * (deg[ok] - 1))
    return c


def clustering_histogram(g: Graph, bins: int = CLUSTERING_BINS) -> np.ndarray:
    hist, _ = np.histogram(clustering_coefficients(g), bins=bins, range=(0.0, 1.0))
    hist = hist.astype(np.float64)
    return hist / hist.sum() if hist.sum() else hist


# orbits ---------------------------------------------------------------------------


def _orbits_of(nodes, nbrs) -> list[int]:
    """Orbit id of each node of a connected induced subgraph on 2-4 nodes."""
    k = len(nodes)
    sub = set(nodes)
    deg = [sum(1 for w in nbrs[v] if w in sub) for v in nodes]
    if k == 2:
        return [0, 0]
    m = sum(deg) // 2
    if k == 3:
        return [3] * 3 if m == 3 else [2 if d == 2 else 1 for d in deg]
    if m == 3:
        if max(deg) == 3:
            return [7 if d == 3 else 6 for d in deg]
        return [5 if d == 2 else 4 for d in deg]
    if m == 4:
        if max(deg) == 2:
            return [8] * 4
        return [{1: 9, 2: 10, 3: 11}[d] for d in deg]
    if m == 5:
        return [13 if d == 3 else 12 for d in deg]
    return [14] * 4


def _connected_subsets(nbrs, max_size: int):
    """Enumerate connected node subsets of size 2..max_size, each exactly once
    (extension of the subgraph by neighbours larger than its root)."""

    def extend(sub, ext, root, sub_nbhd):
        if len(sub) >= 2:
            yield sub
        if len(sub) == max_size:
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            new_ext = set(ext)
            for u in nbrs[w]:
                if u > root and u not in sub_nbhd and u not in sub:
                    new_ext.add(u)
            yield from extend(sub + [w], new_ext, root, sub_nbhd | set(nbrs[w]) | {w})

    for v in range(len(nbrs)):
        ext = {u for u in nbrs[v] if u > v}
        yield from extend([v], ext, v, set(nbrs[v]) | {v})


def orbit_counts_per_node(g: Graph) -> np.ndarray:
    if g.n > ORBIT_CAP:
        raise ValueError(f"orbit counting refused: {g.n} nodes exceeds cap of {ORBIT_CAP}")
    nbrs = [set(x) for x in g.neighbors()]
    counts = np.zeros((g.n, N_ORBITS), dtype=np.int64)
    for sub in _connected_subsets(nbrs, 4):
        for v, o in zip(sub, _orbits_of(sub, nbrs)):
            counts[v, o] += 1
    return counts


def orbit_counts(g: Graph) -> np.ndarray:
    """Mean per-node orbit counts, a 15-vector."""
    if g.n == 0:
        return np.zeros(N_ORBITS)
    return orbit_counts_per_node(g).mean(axis=0)


# statistics + MMD -------------------------------------------------------------------


@dataclass
class GraphStatistics:
    deg: np.ndarray
    clus: np.ndarray
    orbit: np.ndarray


def graph_statistics(g: Graph) -> GraphStatistics:
    return GraphStatistics(degree_histogram(g), clustering_histogram(g), orbit_counts(g))


def statistics_for(graphs, threads: int = 1) -> list[GraphStatistics]:
    if threads <= 1:
        return [graph_statistics(g) for g in graphs]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(graph_statistics, graphs))


def wasserstein_1d(a: np.ndarray, b: np.ndarray, bin_width: float = 1.0) -> float:
    size = max(len(a), len(b))
    pa = np.zeros(size)
    pb = np.zeros(size)
    pa[: len(a)] = a
    pb[: len(b)] = b
    return float(np.sum(np.abs(np.cumsum(pa) - np.cumsum(pb))) * bin_width)


def _standardise(a_vecs, b_vecs):
    both = np.vstack([np.asarray(a_vecs, float), np.asarray(b_vecs, float)])
    # column sums with fsum so the result does not depend on set order
    mean = np.array([math.fsum(col) / len(col) for col in both.T])
    var = np.array([math.fsum((col - mu) ** 2) / len(col) for col, mu in zip(both.T, mean)])
    std = np.where(var > 0, np.sqrt(var), 1.0)
    return (np.asarray(a_vecs, float) - mean) / std, (np.asarray(b_vecs, float) - mean) / std


def pairwise_distances(xs, ys, kind: str = "hist", bin_width: float = 1.0) -> np.ndarray:
    if kind == "hist":
        return np.array([[wasserstein_1d(x, y, bin_width) for y in ys] for x in xs])
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    return np.sqrt(np.maximum(((xs[:, None, :] - ys[None, :, :]) ** 2).sum(-1), 0.0))


def median_sigma(samples, kind: str = "hist", bin_width: float = 1.0) -> float:
    """Median of the nonzero pairwise distances within ``samples`` (1.0 if none)."""
    d = pairwise_distances(samples, samples, kind, bin_width)
    iu = np.triu_indices(len(samples), 1)
    vals = d[iu]
    vals = vals[vals > 0]
    return float(np.median(vals)) if vals.size else 1.0


def mmd_squared(set_a, set_b, sigma: float | None = None, kind: str = "hist",
                bin_width: float = 1.0) -> tuple[float, float]:
    """Biased MMD^2 with a Gaussian kernel. Returns ``(mmd2, sigma_used)``.

    ``kind`` is ``"hist"`` (Wasserstein distance between histograms) or
    ``"vector"`` (Euclidean distance after joint standardisation).
    """
    if not len(set_a) or not len(set_b):
        raise ValueError("MMD needs two nonempty sets")
    a, b = list(set_a), list(set_b)
    if kind == "vector":
        a, b = _standardise(a, b)
    if sigma is None:
        sigma = median_sigma(list(a) + list(b), kind, bin_width)

    def kmean(x, y):
        d = pairwise_distances(x, y, kind, bin_width)
        return math.fsum(np.exp(-(d**2) / (2 * sigma**2)).ravel()) / d.size

    value = kmean(a, a) + kmean(b, b) - 2.0 * kmean(a, b)
    return float(value), float(sigma)


@dataclass
class MMDEntry:
    statistic: str
    mmd2: float
    sigma: float
    n_a: int
    n_b: int


def mmd_report(graphs_a, graphs_b, threads: int = 1, stats=None) -> list[MMDEntry]:
    """One entry per statistic, in the order deg, clus, orbit."""
    sa = stats[0] if stats else statistics_for(graphs_a, threads)
    sb = stats[1] if stats else statistics_for(graphs_b, threads)
    specs = {
        "deg": ("hist", 1.0),
        "clus": ("hist", 1.0 / CLUSTERING_BINS),
        "orbit": ("vector", 1.0),
    }
    report = []
    for name in STATISTICS:
        kind, width = specs[name]
        xa = [getattr(s, name) for s in sa]
        xb = [getattr(s, name) for s in sb]
        val, sig = mmd_squared(xa, xb, kind=kind, bin_width=width)
        report.append(MMDEntry(name, val, sig, len(xa), len(xb)))
    return report


def format_report_text(entries) -> str:
    lines = ["estimator = biased"]
    for e in entries:
        lines += [f"{e.statistic}.mmd2 = {e.mmd2:.17g}", f"{e.statistic}.sigma = {e.sigma:.17g}",
                  f"{e.statistic}.n_a = {e.n_a}", f"{e.statistic}.n_b = {e.n_b}"]
    return "\n".join(lines) + "\n"


def format_report_csv(entries) -> str:
    rows = ["statistic,mmd2,sigma,nA,nB"]
    rows += [f"{e.statistic},{e.mmd2:.17g},{e.sigma:.17g},{e.n_a},{e.n_b}" for e in entries]
    return "\n".join(rows) + "\n"


def parse_report_csv(text: str) -> list[MMDEntry]:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0] != "statistic,mmd2,sigma,nA,nB":
        raise ValueError("unexpected report header")
    out = []
    for l in lines[1:]:
        s, m, sg, na, nb = l.split(",")
        out.append(MMDEntry(s, float(m), float(sg), int(na), int(nb)))
    return out
