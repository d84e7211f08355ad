"""Prefix-restricted walk counts, the learned familiarity matrix and the
walk-count positional encoding.

The count for ``(k, i, j)`` is the number of walks of length ``k`` from node ``i`` to node ``j`` that
only visit nodes ``0..j`` (0-based, in generation order). The counts depend on
nothing later than node ``j``, which is what keeps every quantity derived from
them autoregressive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graph import Graph
from .layers import Params, dense, init_dense, init_mlp2, mlp2

SATURATION = 1e300


@dataclass
class PathCountStack:
    mats: np.ndarray  # (n_k + 1, n, n) walk counts
    logs: np.ndarray  # log1p(mats)

    @property
    def k_max(self) -> int:
        return self.mats.shape[0] - 1

    @property
    def n(self) -> int:
        return self.mats.shape[1]


def path_counts(adj, n_k: int = 16) -> PathCountStack:
    """Count matrices for walk lengths ``0..n_k``.

    Length 0 is the identity; each further length is ``triu(adj @ previous)``,
    the upper triangle being what confines walks to the prefix.
    """
    a = np.asarray(adj, dtype=np.float64)
    n = a.shape[0]
    mats = np.empty((n_k + 1, n, n))
    mats[0] = np.eye(n)
    for k in range(1, n_k + 1):
        mats[k] = np.triu(a @ mats[k - 1])
        np.minimum(mats[k], SATURATION, out=mats[k])
    return PathCountStack(mats=mats, logs=np.log1p(mats))


def brute_force_walk_counts(g: Graph, i: int, j: int, k: int) -> int:
    """Count walks ``i -> j`` of length ``k`` inside nodes ``0..j`` by enumeration."""
    if k > 8 or g.n > 12:
        raise ValueError("brute-force enumeration limited to k <= 8 and n <= 12")
    if i > j:
        return 0
    nbrs = g.neighbors()
    count = 0
    stack = [(i, 0)]
    while stack:
        u, steps = stack.pop()
        if steps == k:
            count += u == j
            continue
        for v in nbrs[u]:
            if v <= j:
                stack.append((v, steps + 1))
    return count


def brute_force_walk_table(g: Graph, k_max: int) -> np.ndarray:
    """Walk counts ``[k, i, j]`` for ``k <= k_max`` from one walk enumeration per start node.

    A walk from ``i`` ending at ``e`` counts towards ``[k, i, e]`` exactly when no
    node on it exceeds ``e``.
    """
    if k_max > 8 or g.n > 12:
        raise ValueError("brute-force enumeration limited to k <= 8 and n <= 12")
    nbrs = g.neighbors()
    table = np.zeros((k_max + 1, g.n, g.n), dtype=np.int64)
    for i in range(g.n):
        stack = [(i, 0, i)]
        while stack:
            u, steps, top = stack.pop()
            if top == u:
                table[steps, i, u] += 1
            if steps == k_max:
                continue
            for v in nbrs[u]:
                stack.append((v, steps + 1, max(top, v)))
    return table


# learned parts -------------------------------------------------------------------


def init_familiarity_net(params: Params, name: str, n_k: int, width: int, rng) -> None:
    init_mlp2(params, name, n_k + 1, width, 1, rng)


def pair_features(stack: PathCountStack, with_start: bool = True) -> np.ndarray:
    """Per-pair inputs ``g_0..g_{n_k}``, flattened row-major.

    With ``with_start`` an extra leading Start position is added whose pairs
    carry all-zero features.
    """
    logs = stack.logs
    n = stack.n
    off = 1 if with_start else 0
    feats = np.zeros((n + off, n + off, logs.shape[0]))
    feats[off:, off:, :] = np.moveaxis(logs, 0, -1)
    return feats.reshape(-1, logs.shape[0])


def familiarity_matrix(features: np.ndarray, params: Params, name: str) -> T.Tensor:
    """``sigmoid(f(g_0..g_{n_k}))`` for every pair, as a square tensor."""
    size = int(round(np.sqrt(features.shape[0])))
    x = T.Tensor(features)
    logits = mlp2(params, name, x)
    return T.sigmoid(T.reshape(logits, (size, size)))


def init_positional(params: Params, n_max: int, n_k: int, width: int, d_col: int,
                    d_hidden: int, rng) -> None:
    init_mlp2(params, "pos.col", n_max, width, d_col, rng)
    init_dense(params, "pos.mix", (n_k + 1) * d_col, d_hidden, rng)


def positional_features(stack: PathCountStack, n_max: int) -> np.ndarray:
    """Inputs of the column net: column ``j`` of every log-count matrix, zero padded to ``n_max``.

    Row ``j * (n_k + 1) + k`` holds the length-``k`` log counts into node ``j``; entries below the
    diagonal are already zero because the counts are upper triangular.
    """
    logs = stack.logs
    nk1, n, _ = logs.shape
    feats = np.zeros((n, nk1, n_max))
    feats[:, :, :n] = np.transpose(logs, (2, 0, 1))
    return feats.reshape(n * nk1, n_max)


def positional_encoding(features: np.ndarray, params: Params, n_nodes: int) -> T.Tensor:
    """One row per node: the column net is applied to each walk length, and a
    dense layer mixes the concatenated results to ``d_hidden``."""
    if n_nodes == 0:
        d = params["pos.mix.w"].shape[1]
        return T.Tensor(np.zeros((0, d)))
    h = mlp2(params, "pos.col", T.Tensor(features), out_act=T.sigmoid)
    h = T.reshape(h, (n_nodes, -1))
    return dense(params, "pos.mix", h)
