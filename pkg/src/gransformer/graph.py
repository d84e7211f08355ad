"""Undirected simple graphs, BFS orderings and the lower-triangular row encoding."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class GraphError(ValueError):
    pass


class ConnectivityError(GraphError):
    pass


class CapacityError(GraphError):
    pass


class MalformedSequenceError(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    ``edges`` holds pairs ``(u, v)`` with ``u < v``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise GraphError("node count must be non-negative")
        clean = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) outside 0..{self.n - 1}")
            clean.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        a = np.asarray(adj)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError(f"adjacency must be square, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise GraphError("adjacency is not symmetric")
        if np.any(np.diag(a) != 0):
            raise GraphError("adjacency has self loops")
        iu, ju = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], frozenset(zip(iu.tolist(), ju.tolist())))

    @property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int8)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1
        return a

    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            nbrs[u].append(v)
            nbrs[v].append(u)
        return nbrs

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def permute(self, pi) -> "Graph":
        """Relabel so that old node ``pi[i]`` becomes node ``i``."""
        inv = np.empty(self.n, dtype=np.int64)
        inv[np.asarray(pi)] = np.arange(self.n)
        return Graph(self.n, frozenset((int(inv[u]), int(inv[v])) for u, v in self.edges))

    def subgraph(self, nodes) -> "Graph":
        nodes = list(nodes)
        index = {v: i for i, v in enumerate(nodes)}
        e = frozenset((index[u], index[v]) for u, v in self.edges if u in index and v in index)
        return Graph(len(nodes), e)

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        return len(_flood(self.neighbors(), 0)) == self.n


def _flood(nbrs: list[list[int]], start: int) -> list[int]:
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                order.append(v)
                queue.append(v)
    return order


def bfs_order(g: Graph, root: int, rng=None) -> np.ndarray:
    """Breadth-first permutation from ``root`` with neighbour order shuffled by ``rng``.

    ``rng`` is a seed or ``numpy.random.Generator``; ``None`` keeps the sorted
    neighbour order.
    """
    if not 0 <= root < g.n:
        raise GraphError(f"root {root} outside graph of {g.n} nodes")
    gen = None if rng is None else np.random.default_rng(rng)
    nbrs = g.neighbors()
    seen = np.zeros(g.n, dtype=bool)
    seen[root] = True
    order = [root]
    queue = deque([root])
    while queue:
        u = queue.popleft()
        cand = [v for v in nbrs[u] if not seen[v]]
        if gen is not None and len(cand) > 1:
            cand = [cand[i] for i in gen.permutation(len(cand))]
        for v in cand:
            seen[v] = True
            order.append(v)
            queue.append(v)
    if len(order) != g.n:
        raise ConnectivityError(f"{g.n - len(order)} node(s) unreachable from root {root}")
    return np.asarray(order, dtype=np.int64)


def random_bfs_order(g: Graph, rng: np.random.Generator) -> np.ndarray:
    """Uniform random root, then a shuffled BFS from it."""
    return bfs_order(g, int(rng.integers(g.n)), rng)


@dataclass
class SequenceEncoding:
    """Adjacency rows of the lower triangle of the permuted adjacency.

    ``rows[i, j]`` (0-based) is 1 iff nodes ``pi[i]`` and ``pi[j]`` are adjacent,
    for ``j < i``; the row width is ``n_max``.
    """

    pi: np.ndarray
    rows: np.ndarray
    n_max: int

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def adjacency(self) -> np.ndarray:
        """Adjacency under the ordering (node ``i`` here is ``pi[i]`` originally)."""
        n = self.n
        low = self.rows[:, :n].astype(np.int8)
        return low + low.T


def to_sequence(g: Graph, pi, n_max: int) -> SequenceEncoding:
    if g.n > n_max:
        raise CapacityError(f"graph has {g.n} nodes, capacity is {n_max}")
    pi = np.asarray(pi, dtype=np.int64)
    if sorted(pi.tolist()) != list(range(g.n)):
        raise GraphError("pi is not a permutation of the nodes")
    a = g.adjacency[np.ix_(pi, pi)]
    rows = np.zeros((g.n, n_max), dtype=np.int8)
    rows[:, : g.n] = np.tril(a, -1)
    return SequenceEncoding(pi=pi, rows=rows, n_max=n_max)


def from_sequence(s: SequenceEncoding | np.ndarray) -> Graph:
    """Rebuild the graph in sequence order (node ``i`` is the ``i``-th row)."""
    rows = s.rows if isinstance(s, SequenceEncoding) else np.asarray(s)
    n = rows.shape[0]
    if rows.ndim != 2:
        raise MalformedSequenceError("rows must be a 2-D array")
    if np.any((rows != 0) & (rows != 1)):
        raise MalformedSequenceError("rows must be binary")
    upper = np.triu(np.ones((n, rows.shape[1]), dtype=bool))
    bad = np.argwhere((rows != 0) & upper)
    if len(bad):
        i, j = bad[0]
        raise MalformedSequenceError(f"row {i} has a nonzero entry at column {j} >= {i}")
    iu, ju = np.nonzero(rows)
    return Graph(n, frozenset((int(j), int(i)) for i, j in zip(iu, ju)))


def components(g: Graph) -> list[list[int]]:
    nbrs = g.neighbors()
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    for s in range(g.n):
        if not seen[s]:
            c = _flood(nbrs, s)
            seen[c] = True
            comps.append(sorted(c))
    return comps


def largest_component(g: Graph) -> Graph:
    """Induced subgraph on the largest connected component, relabelled ``0..m-1``.

    Ties go to the component containing the smallest node id.
    """
    if g.n == 0:
        raise GraphError("empty graph has no components")
    comps = components(g)
    best = max(comps, key=len)
    return g.subgraph(best)


def admit(graphs, n_max: int) -> list[Graph]:
    """Dataset hygiene: keep the largest component, drop graphs over capacity."""
    kept = []
    for k, g in enumerate(graphs):
        h = largest_component(g)
        if h.n > n_max:
            log.warning("graph %d has %d nodes after cleanup, above n_max=%d; skipped", k, h.n, n_max)
            continue
        kept.append(h)
    return kept
