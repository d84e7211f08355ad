"""Parameter dictionaries and dense layers on top of the tensor engine."""

from __future__ import annotations

import numpy as np

from . import tensor as T

Params = dict  # name -> Tensor


def init_dense(params: Params, name: str, fan_in: int, fan_out: int, rng: np.random.Generator,
               bias: bool = True) -> None:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    params[f"{name}.w"] = T.parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out)), name=f"{name}.w")
    if bias:
        params[f"{name}.b"] = T.parameter(np.zeros((1, fan_out)), name=f"{name}.b")


def dense(params: Params, name: str, x: T.Tensor) -> T.Tensor:
    return T.linear(x, params[f"{name}.w"], params.get(f"{name}.b"))


def mlp2(params: Params, name: str, x: T.Tensor, out_act=None) -> T.Tensor:
    """Two dense layers, ReLU between them, optional output activation."""
    y = dense(params, f"{name}.out", T.relu(dense(params, f"{name}.in", x)))
    return y if out_act is None else out_act(y)


def init_mlp2(params: Params, name: str, d_in: int, d_hidden: int, d_out: int,
              rng: np.random.Generator) -> None:
    init_dense(params, f"{name}.in", d_in, d_hidden, rng)
    init_dense(params, f"{name}.out", d_hidden, d_out, rng)
