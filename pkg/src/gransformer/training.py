"""Optimisation loop, binary checkpoints and the ablation harness."""

from __future__ import annotations

import dataclasses
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .graph import Graph, random_bfs_order, to_sequence
from .model import EncoderConfig, Gransformer

log = logging.getLogger(__name__)

MAGIC = b"GRNS"
FORMAT_VERSION = 1


class NumericalAbort(FloatingPointError):
    pass


class CheckpointError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 8
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 0
    checkpoint_every: int = 0
    eval_every: int = 1
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and lr >= 0 required")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in [0, 1)")


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self.v = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data -= update.astype(p.data.dtype)


def clip_grad_norm(params, max_norm: float) -> float:
    grads = [p.grad for p in params if p.grad is not None]
    norm = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads)))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm


def split_dataset(graphs, test_fraction: float, seed: int):
    """Shuffled train/test split; the test share is rounded down."""
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(graphs))
    n_test = int(len(graphs) * test_fraction)
    return [graphs[i] for i in idx[n_test:]], [graphs[i] for i in idx[:n_test]]


def ordered_rows(g: Graph, model: Gransformer, rng: np.random.Generator) -> np.ndarray:
    pi = random_bfs_order(g, rng)
    return to_sequence(g, pi, model.config.n_max).rows


def _check_finite(value: float, context: dict) -> None:
    if not np.isfinite(value):
        raise NumericalAbort(f"non-finite loss {value!r}; context: {json.dumps(context, default=str)}")


def train_epoch(model: Gransformer, opt: Adam, graphs, cfg: TrainConfig, rng: np.random.Generator,
                epoch: int = 0) -> float:
    """One pass over ``graphs`` with a fresh BFS ordering per graph.

    Returns the mean per-graph NLL of the pass (losses taken before each step).
    """
    if not graphs:
        raise ValueError("empty dataset")
    params = model.parameters()
    order = rng.permutation(len(graphs))
    total = 0.0
    for start in range(0, len(order), cfg.batch_size):
        batch = order[start : start + cfg.batch_size]
        T.zero_grads(params)
        loss = None
        for gi in batch:
            rows = ordered_rows(graphs[gi], model, rng)
            try:
                term = model.graph_nll(rows)
            except (T.DomainError, T.NonFiniteError, FloatingPointError) as exc:
                raise NumericalAbort(f"epoch {epoch}, graph {int(gi)}: {exc}") from exc
            _check_finite(term.item(), {"epoch": epoch, "graph": int(gi), "n": graphs[gi].n})
            total += term.item()
            loss = term if loss is None else T.add(loss, term)
        if loss.requires_grad:
            loss.backward()
            clip_grad_norm(params, cfg.clip_norm)
            opt.step()
    return total / len(graphs)


def evaluate_nll(model: Gransformer, graphs, seed: int = 12345) -> float:
    """Mean per-graph NLL under BFS orderings drawn from a fixed seed."""
    if not graphs:
        return float("nan")
    rng = np.random.default_rng(seed)
    total = 0.0
    with T.no_grad():
        for g in graphs:
            total += model.graph_nll(ordered_rows(g, model, rng)).item()
    return total / len(graphs)


def train(model: Gransformer, train_graphs, test_graphs, cfg: TrainConfig, rng=None,
          on_epoch=None, on_checkpoint=None):
    """Run ``cfg.epochs`` epochs. Returns the trace as ``(epoch, train_nll, test_nll)`` rows.

    ``on_epoch(row)`` fires after each epoch, ``on_checkpoint(epoch, rng)`` at
    the checkpoint cadence.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    opt = Adam(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        train_nll = train_epoch(model, opt, train_graphs, cfg, rng, epoch)
        test_nll = float("nan")
        if test_graphs and cfg.eval_every and epoch % cfg.eval_every == 0:
            test_nll = evaluate_nll(model, test_graphs)
        row = (epoch, train_nll, test_nll)
        trace.append(row)
        log.debug("epoch %d train %.4f test %.4f", *row)
        if on_epoch:
            on_epoch(row)
        if on_checkpoint and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            on_checkpoint(epoch, rng)
    return trace


# ablation ---------------------------------------------------------------------------

ABLATIONS = {
    "full": {},
    "no_structure": {"use_dual_attention": False, "use_familiarity": False, "use_graph_pos_enc": False},
    "no_structure_no_made": {"use_dual_attention": False, "use_familiarity": False,
                             "use_graph_pos_enc": False, "use_made": False},
}


def ablation_suite(train_graphs, test_graphs, enc: EncoderConfig, cfg: TrainConfig,
                   variants=tuple(ABLATIONS), model_seed: int = 0) -> dict:
    """Train each variant from the same seeds and data order.

    Returns ``{variant: {"train_nll", "test_nll", "trace", "model"}}`` where the
    NLLs are evaluated after training under fixed orderings.
    """
    results = {}
    for name in variants:
        vcfg = dataclasses.replace(enc, **ABLATIONS[name])
        model = Gransformer(vcfg, seed=model_seed)
        trace = train(model, train_graphs, test_graphs, cfg)
        results[name] = {
            "train_nll": evaluate_nll(model, train_graphs),
            "test_nll": evaluate_nll(model, test_graphs),
            "trace": trace,
            "model": model,
        }
    return results


# checkpoints -------------------------------------------------------------------------


def _config_text(meta: dict) -> str:
    return "".join(f"{k} = {json.dumps(meta[k], sort_keys=True)}\n" for k in sorted(meta))


def _parse_config_text(text: str) -> dict:
    meta = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        meta[key] = json.loads(value)
    return meta


def save_checkpoint(model: Gransformer, path, epoch: int = 0, rng_state=None, extra=None) -> None:
    meta = {"encoder": model.config.to_dict(), "epoch": epoch}
    if rng_state is not None:
        meta["rng_state"] = rng_state
    if extra:
        meta.update(extra)
    cfg = _config_text(meta).encode("utf-8")
    out = bytearray(MAGIC)
    out += struct.pack("<I", FORMAT_VERSION)
    out += struct.pack("<Q", len(cfg)) + cfg
    out += struct.pack("<I", len(model.params))
    for name, t in model.params.items():
        raw = name.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw
        out += struct.pack("<I", t.data.ndim)
        out += struct.pack(f"<{t.data.ndim}Q", *t.data.shape)
        out += np.ascontiguousarray(t.data, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"truncated file while reading {what}", self.pos)
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_checkpoint(path) -> tuple[dict, dict]:
    """Parse a checkpoint into ``(meta, {name: float32 array})``."""
    r = _Reader(Path(path).read_bytes())
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("bad magic bytes", 0)
    (version,) = r.unpack("<I", "format version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {version}", 4)
    (clen,) = r.unpack("<Q", "config length")
    start = r.pos
    try:
        meta = _parse_config_text(r.take(clen, "config block").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable config block: {exc}", start) from exc
    (count,) = r.unpack("<I", "tensor count")
    tensors = {}
    for _ in range(count):
        (nlen,) = r.unpack("<I", "name length")
        at = r.pos
        try:
            name = r.take(nlen, "tensor name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError("tensor name is not UTF-8", at) from exc
        (rank,) = r.unpack("<I", f"rank of {name}")
        dims = r.unpack(f"<{rank}Q", f"dims of {name}")
        size = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(r.take(4 * size, f"values of {name}"), dtype="<f4").reshape(dims)
        tensors[name] = values.astype(np.float32)
    if r.pos != len(r.buf):
        raise CheckpointError("trailing bytes after last tensor", r.pos)
    return meta, tensors


def config_from_meta(meta: dict) -> EncoderConfig:
    enc = dict(meta["encoder"])
    enc["made_hidden"] = tuple(enc["made_hidden"])
    return EncoderConfig(**enc)


def load_into(model: Gransformer, tensors: dict) -> None:
    """Copy tensors into ``model``; any name or shape disagreement is reported in full."""
    diffs = []
    for name in sorted(set(model.params) | set(tensors)):
        if name not in tensors:
            diffs.append(f"missing in checkpoint: {name} {model.params[name].shape}")
        elif name not in model.params:
            diffs.append(f"unexpected in checkpoint: {name} {tensors[name].shape}")
        elif model.params[name].shape != tensors[name].shape:
            diffs.append(f"shape mismatch: {name} model {model.params[name].shape} "
                         f"vs checkpoint {tensors[name].shape}")
    if diffs:
        raise CheckpointError("checkpoint does not match model:\n  " + "\n  ".join(diffs))
    for name, t in model.params.items():
        t.data = tensors[name].astype(t.data.dtype).copy()


def load_checkpoint(path) -> tuple[Gransformer, dict]:
    meta, tensors = read_checkpoint(path)
    try:
        cfg = config_from_meta(meta)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid encoder config in checkpoint: {exc}") from exc
    model = Gransformer(cfg)
    load_into(model, tensors)
    return model, meta
