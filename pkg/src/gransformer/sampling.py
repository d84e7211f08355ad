"""Row likelihood without the all-zero vector, the exact sequential sampler
for it, node-count sampling and full graph generation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graph import Graph, from_sequence
from .made import made_logits


class OracleFailure(RuntimeError):
    pass


class DataError(ValueError):
    pass


# node counts -------------------------------------------------------------------


@dataclass
class NodeSizeDistribution:
    sizes: np.ndarray  # support, ascending
    probs: np.ndarray

    @classmethod
    def from_sizes(cls, sizes, n_max: int | None = None) -> "NodeSizeDistribution":
        sizes = np.asarray(list(sizes), dtype=np.int64)
        if sizes.size == 0:
            raise ValueError("no sizes to estimate from")
        if sizes.min() < 1 or (n_max is not None and sizes.max() > n_max):
            raise ValueError("sizes must lie in [1, n_max]")
        support, counts = np.unique(sizes, return_counts=True)
        return cls(support, counts / counts.sum())

    @classmethod
    def from_graphs(cls, graphs, n_max: int | None = None) -> "NodeSizeDistribution":
        return cls.from_sizes([g.n for g in graphs], n_max)

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)


def sample_node_count(d: NodeSizeDistribution, rng: np.random.Generator) -> int:
    u = rng.random()
    idx = int(np.searchsorted(d.cdf, u, side="right"))
    return int(d.sizes[min(idx, len(d.sizes) - 1)])


# row distributions ---------------------------------------------------------------


class RowDistribution:
    """Autoregressive law over binary rows of a fixed length.

    ``conditionals(prefixes)`` takes a (B, i) array of prefixes and returns
    ``P(Y_i = 1 | prefix)`` for each; ``zero_conditionals()`` returns the
    same quantity for all-zero prefixes at every position.
    """

    length: int

    def conditionals(self, prefixes: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_conditionals(self) -> np.ndarray:
        return np.array([self.conditionals(np.zeros((1, i), dtype=np.int8))[0] for i in range(self.length)])


class TableDistribution(RowDistribution):
    """Explicit conditional table: ``tables[i][code(prefix)]`` with the
    prefix read as a binary number, first bit most significant."""

    def __init__(self, tables):
        self.tables = [np.asarray(t, dtype=np.float64) for t in tables]
        self.length = len(self.tables)
        for i, t in enumerate(self.tables):
            if t.shape != (2**i,):
                raise ValueError(f"table {i} must have {2**i} entries")

    @classmethod
    def random(cls, length: int, rng: np.random.Generator, a: float = 1.0, b: float = 1.0):
        return cls([rng.beta(a, b, size=2**i) for i in range(length)])

    def conditionals(self, prefixes):
        prefixes = np.asarray(prefixes)
        i = prefixes.shape[1]
        weights = 1 << np.arange(i - 1, -1, -1, dtype=np.int64)
        return self.tables[i][prefixes.astype(np.int64) @ weights if i else np.zeros(len(prefixes), dtype=np.int64)]

    def zero_conditionals(self):
        return np.array([t[0] for t in self.tables])


class MadeRowDistribution(RowDistribution):
    """Row law of one node backed by the model's MADE head."""

    def __init__(self, model, cond: np.ndarray, length: int):
        self.model = model
        self.cond = np.asarray(cond, dtype=np.float64).ravel()
        self.length = length

    def _logits(self, prefixes: np.ndarray) -> np.ndarray:
        n_max = self.model.config.n_max
        b, i = prefixes.shape
        tgt = np.zeros((b, n_max))
        tgt[:, :i] = prefixes
        with T.no_grad():
            z = made_logits(T.Tensor(tgt), T.Tensor(np.repeat(self.cond[None, :], b, axis=0)),
                            self.model.masks, self.model.params)
        return z.data.astype(np.float64)

    def conditionals(self, prefixes):
        prefixes = np.asarray(prefixes)
        return T._sigmoid(self._logits(prefixes)[:, prefixes.shape[1]])

    def zero_conditionals(self):
        return T._sigmoid(self._logits(np.zeros((1, 0)))[0, : self.length])


# constrained law --------------------------------------------------------------------


def zero_suffix_log_mass(p_zero: np.ndarray) -> np.ndarray:
    """``s[i] = sum_{j >= i} log P(Y_j = 0 | zeros)``, with ``s[length] = 0``."""
    log_q = np.log1p(-np.asarray(p_zero, dtype=np.float64))
    return np.concatenate([np.cumsum(log_q[::-1])[::-1], [0.0]])


def constrained_conditional(p_i, prefix_has_one, suffix_i: float):
    """Probability that bit ``i`` is 1 under the zero-excluded law.

    Once an earlier bit is 1 the raw conditional is kept. Along the all-zero
    prefix it is ``p_i * prefix / (prefix - p_zero)``, which simplifies to
    ``p_i / (1 - prod_{j >= i} q_j)``. A vanishing denominator means the only
    remaining mass is the forbidden vector, and the bit is forced to 1.
    """
    p_i = np.asarray(p_i, dtype=np.float64)
    denom = -np.expm1(suffix_i)
    if denom <= 0.0:
        boosted = np.ones_like(p_i)
    else:
        boosted = np.minimum(p_i / denom, 1.0)
    return np.where(prefix_has_one, p_i, boosted)


def sample_rows(dist: RowDistribution, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Draw ``size`` nonzero rows from the zero-excluded law, one conditional per bit."""
    length = dist.length
    if length < 1:
        raise ValueError("row length must be >= 1")
    suffix = zero_suffix_log_mass(dist.zero_conditionals())
    out = np.zeros((size, length), dtype=np.int8)
    has_one = np.zeros(size, dtype=bool)
    for i in range(length):
        p_i = dist.conditionals(out[:, :i])
        prob = constrained_conditional(p_i, has_one, suffix[i])
        bit = rng.random(size) < prob
        out[:, i] = bit
        has_one |= bit
    return out


def sample_row(dist: RowDistribution, rng: np.random.Generator) -> np.ndarray:
    return sample_rows(dist, rng, 1)[0]


def sampler_law(dist: RowDistribution) -> dict[tuple, float]:
    """Exact law of ``sample_rows`` by chaining its per-bit probabilities."""
    suffix = zero_suffix_log_mass(dist.zero_conditionals())
    law = {}
    for y in itertools.product((0, 1), repeat=dist.length):
        prob = 1.0
        for i in range(dist.length):
            p_i = dist.conditionals(np.array([y[:i]], dtype=np.int8))[0]
            c = float(constrained_conditional(p_i, any(y[:i]), suffix[i]))
            prob *= c if y[i] else 1.0 - c
        law[y] = prob
    return law


def enumerate_ptilde(dist: RowDistribution) -> dict[tuple, float]:
    """Zero-excluded law by brute force: raw chain-rule probabilities renormalised."""
    raw = {}
    for y in itertools.product((0, 1), repeat=dist.length):
        prob = 1.0
        for i in range(dist.length):
            p_i = dist.conditionals(np.array([y[:i]], dtype=np.int8))[0]
            prob *= p_i if y[i] else 1.0 - p_i
        raw[y] = prob
    zero = tuple([0] * dist.length)
    p0 = raw[zero]
    return {y: (0.0 if y == zero else v / (1.0 - p0)) for y, v in raw.items()}


def rejection_sample_oracle(dist: RowDistribution, rng: np.random.Generator, size: int = 1,
                            max_retries: int = 10**6):
    """Sample from the raw law, redrawing all-zero rows.

    Returns ``(rows, attempts)`` where ``attempts[k]`` counts the raw draws
    spent on sample ``k``.
    """
    length = dist.length
    out = np.zeros((size, length), dtype=np.int8)
    attempts = np.zeros(size, dtype=np.int64)
    pending = np.arange(size)
    while pending.size:
        attempts[pending] += 1
        if attempts[pending].max() > max_retries:
            raise OracleFailure(f"rejection sampler exceeded {max_retries} retries")
        draw = np.zeros((pending.size, length), dtype=np.int8)
        for i in range(length):
            draw[:, i] = rng.random(pending.size) < dist.conditionals(draw[:, :i])
        ok = draw.any(axis=1)
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]
    return out, attempts


# likelihood ------------------------------------------------------------------------


def row_nll(true_row, p, p_zero: float, i: int) -> float:
    """Zero-excluded ``-log P(row)`` for node ``i`` (1-based) given raw conditionals ``p``.

    ``p[j]`` is ``P(Y_j = 1 | true prefix)``; only the first ``i - 1`` entries
    are used. The root row (``i == 1``) costs nothing.
    """
    if i <= 1:
        return 0.0
    y = np.asarray(true_row[: i - 1], dtype=np.float64)
    if not y.any():
        raise DataError(f"row {i} is all zero; every non-root node needs an earlier neighbour")
    pp = np.asarray(p[: i - 1], dtype=np.float64)
    log_p = np.sum(y * np.log(pp) + (1 - y) * np.log1p(-pp))
    return float(-log_p + np.log1p(-p_zero))


# generation -----------------------------------------------------------------------


def generate_rows(model, n: int, rng: np.random.Generator) -> np.ndarray:
    """Row encoding of one generated graph with ``n`` nodes."""
    n_max = model.config.n_max
    rows = np.zeros((n, n_max), dtype=np.int8)
    adj = np.zeros((n, n), dtype=np.int8)
    with T.no_grad():
        for i in range(1, n):
            pre = model.prefix(rows[:i], adj[:i, :i])
            h = model.encode(pre)
            cond = model.conditioning(T.rows(h, slice(i, i + 1)), n)
            dist = MadeRowDistribution(model, cond.data, i)
            bits = sample_row(dist, rng)
            rows[i, :i] = bits
            adj[i, :i] = bits
            adj[:i, i] = bits
    return rows


def generate_graph(model, sizes: NodeSizeDistribution, rng: np.random.Generator) -> Graph:
    n = sample_node_count(sizes, rng)
    return from_sequence(generate_rows(model, n, rng))
