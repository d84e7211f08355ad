"""Masked transformer encoder with edge-conditioned attention, familiarity
modulation and the shared MADE head.

Sequence positions: position 0 is the learned Start vector, position ``p``
(1-based) carries adjacency row ``p``. The output at position ``p`` conditions the
edges of node ``p + 1``, so a graph of ``n`` nodes is encoded from Start and
its first ``n - 1`` rows.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .familiarity import (
    PathCountStack,
    familiarity_matrix,
    init_familiarity_net,
    init_positional,
    pair_features,
    path_counts,
    positional_encoding,
    positional_features,
)
from .layers import Params, dense, init_dense, init_mlp2, mlp2
from .made import MadeMasks, build_masks, init_made, made_logits, n_bits_width, size_code

MASK_MODES = ("additive_pre_softmax", "multiply_after_softmax")


@dataclass
class EncoderConfig:
    n_max: int = 20
    n_layers: int = 2
    d_hidden: int = 64
    d_k: int = 0  # 0 -> d_hidden
    n_k: int = 16
    fam_width: int = 0  # 0 -> d_hidden // 4
    pos_width: int = 0  # 0 -> d_hidden // 4
    ffn_width: int = 0  # 0 -> 2 * d_hidden
    made_hidden: tuple = ()  # () -> (2 * n_max, 2 * n_max)
    use_dual_attention: bool = True
    use_familiarity: bool = True
    use_graph_pos_enc: bool = True
    use_made: bool = True
    made_input_sigmoid: bool = True
    mask_mode: str = "additive_pre_softmax"
    mask_seed: int = 0

    def __post_init__(self):
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        if self.d_hidden < 4:
            raise ValueError("d_hidden must be >= 4")
        if self.n_k < 0:
            raise ValueError("n_k must be >= 0")
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}")
        self.d_k = self.d_k or self.d_hidden
        self.fam_width = self.fam_width or max(1, self.d_hidden // 4)
        self.pos_width = self.pos_width or max(1, self.d_hidden // 4)
        self.ffn_width = self.ffn_width or 2 * self.d_hidden
        self.made_hidden = tuple(self.made_hidden) or (2 * self.n_max, 2 * self.n_max)

    @property
    def uses_structure(self) -> bool:
        return self.use_dual_attention or self.use_familiarity or self.use_graph_pos_enc

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["made_hidden"] = list(self.made_hidden)
        return d


@dataclass
class Prefix:
    """Constant inputs for encoding the first ``m`` nodes of an ordering."""

    rows: np.ndarray  # (m, n_max)
    adj: np.ndarray  # (m, m)
    stack: PathCountStack | None = None
    pair_feats: np.ndarray | None = None
    pos_feats: np.ndarray | None = None
    edge_ind: np.ndarray = field(default=None)  # (m+1, m+1) in position space
    mask: np.ndarray = field(default=None)  # (m+1, m+1) bool, lower triangular

    @property
    def m(self) -> int:
        return self.rows.shape[0]


def build_prefix(rows, adj, cfg: EncoderConfig) -> Prefix:
    rows = np.asarray(rows, dtype=np.float64)
    adj = np.asarray(adj, dtype=np.float64)
    m = rows.shape[0]
    pre = Prefix(rows=rows, adj=adj)
    if cfg.use_familiarity or cfg.use_graph_pos_enc:
        pre.stack = path_counts(adj, cfg.n_k)
        if cfg.use_familiarity:
            pre.pair_feats = pair_features(pre.stack)
        if cfg.use_graph_pos_enc:
            pre.pos_feats = positional_features(pre.stack, cfg.n_max)
    e = np.zeros((m + 1, m + 1))
    low = np.tril(adj, -1)
    e[1:, 1:] = low + low.T
    pre.edge_ind = e
    pre.mask = np.tril(np.ones((m + 1, m + 1), dtype=bool))
    return pre


class Gransformer:
    """Parameters plus forward computations. Masks are constants derived from
    ``config.mask_seed``; everything trainable lives in ``self.params``."""

    def __init__(self, config: EncoderConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        p: Params = {}
        p["embed.start"] = T.parameter(rng.normal(0.0, 0.1, (1, c.d_hidden)), "embed.start")
        init_dense(p, "embed.proj", c.n_max, c.d_hidden, rng)
        if c.use_graph_pos_enc:
            init_positional(p, c.n_max, c.n_k, c.pos_width, c.pos_width, c.d_hidden, rng)
        else:
            p["embed.index"] = T.parameter(rng.normal(0.0, 0.1, (c.n_max, c.d_hidden)), "embed.index")
        branches = (1, 2) if c.use_dual_attention else (1,)
        for t in range(c.n_layers):
            for b in branches:
                init_dense(p, f"layer{t}.q{b}", c.d_hidden, c.d_k, rng)
                init_dense(p, f"layer{t}.k{b}", c.d_hidden, c.d_k, rng)
                init_dense(p, f"layer{t}.v{b}", c.d_hidden, c.d_hidden, rng)
            if c.use_familiarity:
                init_familiarity_net(p, f"layer{t}.fam", c.n_k, c.fam_width, rng)
            init_mlp2(p, f"layer{t}.ffn", c.d_hidden, c.ffn_width, c.d_hidden, rng)
        self.n_bits = n_bits_width(c.n_max)
        self.masks: MadeMasks = build_masks(c.n_max, c.d_hidden + self.n_bits, c.made_hidden,
                                            c.mask_seed, use_target=c.use_made)
        init_made(p, self.masks, rng)
        for name, t in p.items():
            t.name = name
        self.params = p

    # ------------------------------------------------------------------

    def parameters(self) -> list[T.Tensor]:
        return list(self.params.values())

    def prefix(self, rows, adj) -> Prefix:
        return build_prefix(rows, adj, self.config)

    def embed(self, pre: Prefix, rows_override: T.Tensor | None = None) -> T.Tensor:
        p, c = self.params, self.config
        m = pre.m
        parts = [p["embed.start"]]
        if m:
            x = rows_override if rows_override is not None else T.Tensor(pre.rows)
            proj = dense(p, "embed.proj", x)
            if c.use_graph_pos_enc:
                pos = positional_encoding(pre.pos_feats, p, m)
            else:
                pos = T.rows(p["embed.index"], slice(0, m))
            parts.append(T.add(proj, pos))
        return T.concat(parts, axis=0)

    def attention(self, v: T.Tensor, t: int, pre: Prefix, fam: T.Tensor | None) -> T.Tensor:
        p, c = self.params, self.config
        branches = (1, 2) if c.use_dual_attention else (1,)
        out = None
        for b in branches:
            q = dense(p, f"layer{t}.q{b}", v)
            k = dense(p, f"layer{t}.k{b}", v)
            scores = T.scale(T.matmul(q, T.transpose(k)), 1.0 / np.sqrt(c.d_k))
            if c.mask_mode == "additive_pre_softmax":
                att = T.softmax_rows(scores, pre.mask)
            else:
                att = T.mul(T.softmax_rows(scores), T.Tensor(pre.mask.astype(np.float64)))
            if fam is not None:
                att = T.mul(att, T.transpose(fam))
            if c.use_dual_attention:
                sel = pre.edge_ind if b == 1 else 1.0 - pre.edge_ind
                att = T.mul(att, T.Tensor(sel))
            msg = T.matmul(att, dense(p, f"layer{t}.v{b}", v))
            out = msg if out is None else T.add(out, msg)
        return out

    def encode(self, pre: Prefix, rows_override: T.Tensor | None = None) -> T.Tensor:
        """Hidden vectors for positions ``0..m``, i.e. the conditioning of nodes ``1..m+1``."""
        c = self.config
        v = self.embed(pre, rows_override)
        for t in range(c.n_layers):
            fam = familiarity_matrix(pre.pair_feats, self.params, f"layer{t}.fam") if c.use_familiarity else None
            v = T.add(v, self.attention(v, t, pre, fam))
            v = T.add(v, mlp2(self.params, f"layer{t}.ffn", v))
        return v

    def conditioning(self, h: T.Tensor, n: int) -> T.Tensor:
        """MADE conditioning inputs: (optionally squashed) encoder output and the size code."""
        if self.config.made_input_sigmoid:
            h = T.sigmoid(h)
        code = np.repeat(size_code(n, self.config.n_max)[None, :], h.shape[0], axis=0)
        return T.concat([h, T.Tensor(code)], axis=1)

    # ------------------------------------------------------------------

    def graph_nll(self, rows, adj=None, pre: Prefix | None = None) -> T.Tensor:
        """Negative log-likelihood of one ordered graph, all-zero rows excluded.

        ``rows`` is the (n, n_max) row encoding; node 0 contributes nothing,
        every later node contributes ``-log P(row) + log(1 - P(all zeros))``.
        """
        rows = np.asarray(rows, dtype=np.float64)
        n = rows.shape[0]
        if n <= 1:
            return T.Tensor(0.0)
        if adj is None:
            low = rows[:, :n]
            adj = low + low.T
        if pre is None:
            pre = self.prefix(rows[: n - 1], np.asarray(adj)[: n - 1, : n - 1])
        h = self.encode(pre)
        cond = self.conditioning(h, n)
        n_max = self.config.n_max
        targets = T.Tensor(np.concatenate([rows, np.zeros_like(rows)], axis=0))
        z = made_logits(targets, T.concat([cond, cond], axis=0), self.masks, self.params)
        z_true = T.rows(z, slice(0, n))
        z_zero = T.rows(z, slice(n, 2 * n))
        bits = np.tril(np.ones((n, n_max)), -1)
        bits[:, n:] = 0.0
        sp = T.softplus(z_true)
        # -log P(y) for Bernoulli logits: softplus(z) - y * z
        bern = T.sub(sp, T.mul(z_true, T.Tensor(rows)))
        nll = T.total(T.mul(bern, T.Tensor(bits)))
        neg_log_p0 = T.matmul(T.mul(T.softplus(z_zero), T.Tensor(bits)), T.Tensor(np.ones((n_max, 1))))
        log_1m_p0 = T.log1mexp(T.rows(neg_log_p0, slice(1, n)))
        return T.add(nll, T.total(log_1m_p0))
