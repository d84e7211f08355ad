"""Masked autoencoder (MADE) output head shared by every node.

Inputs are the target row (units tagged ``1..n_max``) followed by conditioning
units tagged 0: the encoder output for the node and the binary code of the
graph size. Output unit ``t`` only sees target entries tagged ``< t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import Params


def n_bits_width(n_max: int) -> int:
    return max(1, int(np.ceil(np.log2(n_max + 1))))


def size_code(n: int, n_max: int) -> np.ndarray:
    """Binary code of ``n``, most significant bit first."""
    width = n_bits_width(n_max)
    if not 0 <= n < 2**width:
        raise ValueError(f"n={n} does not fit in {width} bits")
    return np.array([(n >> (width - 1 - b)) & 1 for b in range(width)], dtype=np.float64)


@dataclass
class MadeMasks:
    n_max: int
    n_cond: int
    in_tags: np.ndarray
    hidden_tags: list[np.ndarray]
    out_tags: np.ndarray
    layers: list[np.ndarray]  # input->h1, h1->h2, ..., h_last->output
    direct: np.ndarray  # input->output

    def reachability(self) -> np.ndarray:
        """Boolean (inputs x outputs) matrix: is there any path through nonzero mask entries."""
        r = self.layers[0].astype(bool)
        for m in self.layers[1:]:
            r = (r.astype(np.int64) @ m.astype(np.int64)) > 0
        return r | self.direct.astype(bool)


def build_masks(n_max: int, n_cond: int, hidden_sizes, seed, use_target: bool = True) -> MadeMasks:
    """MADE masks with random hidden tags in ``1..n_max-1``.

    Hidden-to-hidden connections use ``tag(u) <= tag(w)``; connections into
    the output layer (hidden and direct) use the strict ``tag(u) < tag(w)``.
    With ``use_target`` off the target inputs are disconnected, giving an
    independent-Bernoulli head.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if not hidden_sizes or min(hidden_sizes) < 1:
        raise ValueError("hidden sizes must be >= 1")
    rng = np.random.default_rng(seed)
    in_tags = np.concatenate([np.arange(1, n_max + 1), np.zeros(n_cond, dtype=np.int64)])
    hidden_tags = [rng.integers(1, n_max, size=h) for h in hidden_sizes]
    out_tags = np.arange(1, n_max + 1)
    tags = [in_tags, *hidden_tags]
    layers = [(tags[l][:, None] <= tags[l + 1][None, :]).astype(np.float64) for l in range(len(hidden_tags))]
    layers.append((hidden_tags[-1][:, None] < out_tags[None, :]).astype(np.float64))
    direct = (in_tags[:, None] < out_tags[None, :]).astype(np.float64)
    if not use_target:
        layers[0][:n_max] = 0.0
        direct[:n_max] = 0.0
    return MadeMasks(n_max, n_cond, in_tags, hidden_tags, out_tags, layers, direct)


def init_made(params: Params, masks: MadeMasks, rng) -> None:
    sizes = [len(masks.in_tags)] + [len(h) for h in masks.hidden_tags] + [masks.n_max]
    for l in range(len(sizes) - 1):
        limit = np.sqrt(6.0 / (sizes[l] + sizes[l + 1]))
        params[f"made.{l}.w"] = T.parameter(rng.uniform(-limit, limit, (sizes[l], sizes[l + 1])), f"made.{l}.w")
        params[f"made.{l}.b"] = T.parameter(np.zeros((1, sizes[l + 1])), f"made.{l}.b")
    limit = np.sqrt(6.0 / (sizes[0] + masks.n_max))
    params["made.direct.w"] = T.parameter(rng.uniform(-limit, limit, (sizes[0], masks.n_max)), "made.direct.w")


def made_logits(targets: T.Tensor, cond: T.Tensor, masks: MadeMasks, params: Params) -> T.Tensor:
    """Pre-sigmoid outputs, one row per (target row, conditioning row) pair."""
    x = T.concat([targets, cond], axis=1)
    h = x
    n_layers = len(masks.layers)
    for l, m in enumerate(masks.layers):
        w = T.mul(params[f"made.{l}.w"], T.Tensor(m))
        h = T.linear(h, w, params[f"made.{l}.b"])
        if l < n_layers - 1:
            h = T.relu(h)
    direct = T.matmul(x, T.mul(params["made.direct.w"], T.Tensor(masks.direct)))
    return T.add(h, direct)


def made_logit_rows(target_rows, h, n_bits, masks: MadeMasks, params: Params) -> np.ndarray:
    """Logits for a batch of target rows sharing one conditioning vector."""
    tgt = np.atleast_2d(np.asarray(target_rows))
    cond = np.concatenate([np.ravel(h), np.ravel(n_bits)])[None, :]
    with T.no_grad():
        z = made_logits(T.Tensor(tgt), T.Tensor(np.repeat(cond, len(tgt), axis=0)), masks, params)
    return z.data.astype(np.float64)


def made_forward(target_row, h, n_bits, masks: MadeMasks, params: Params) -> np.ndarray:
    """Edge probabilities for one node: ``p[j] = P(L[j] = 1 | L[:j], h, n)``."""
    return T._sigmoid(made_logit_rows(target_row, h, n_bits, masks, params)[0])


def conditionals_for_zero_target(h, n_bits, masks: MadeMasks, params: Params) -> np.ndarray:
    """``q[j] = P(Y_j = 0 | Y_0..Y_{j-1} = 0)`` from a single all-zero pass."""
    z = made_logit_rows(np.zeros(masks.n_max), h, n_bits, masks, params)[0]
    return T._sigmoid(-z)
