"""Run configuration: ``key = value`` lines, ``#`` comments, flag overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .model import MASK_MODES, EncoderConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_tuple(text: str) -> tuple:
    text = text.strip()
    return tuple(int(x) for x in text.split(",") if x.strip()) if text else ()


def _mask_mode(text: str) -> str:
    if text not in MASK_MODES:
        raise ValueError(f"expected one of {', '.join(MASK_MODES)}")
    return text


def _path(text: str) -> str:
    if not text:
        raise ValueError("empty path")
    return text


ENCODER_KEYS = {f.name: f for f in dataclasses.fields(EncoderConfig)}
TRAIN_KEYS = {f.name: f for f in dataclasses.fields(TrainConfig)}

PARSERS = {
    "dataset": _path,
    "out_dir": _path,
    "model_seed": int,
    "threads": int,
    "made_hidden": _int_tuple,
    "mask_mode": _mask_mode,
}
for _name, _f in {**ENCODER_KEYS, **TRAIN_KEYS}.items():
    if _name not in PARSERS:
        _default = _f.default
        PARSERS[_name] = _bool if isinstance(_default, bool) else type(_default)


@dataclass
class RunConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: str | None = None
    out_dir: str = "run"
    model_seed: int = 0
    threads: int = 1


def parse_lines(text: str, source: str = "<config>") -> dict[str, tuple]:
    """Raw ``{key: (value_text, line)}``; unknown keys and bad syntax raise."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        raw[key] = (value, lineno)
    return raw


def build_config(raw: dict[str, tuple], source: str = "<config>") -> RunConfig:
    values = {}
    for key, (text, lineno) in raw.items():
        try:
            values[key] = PARSERS[key](text)
        except ValueError as exc:
            where = f"{source}:{lineno}" if lineno else source
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    enc = {k: v for k, v in values.items() if k in ENCODER_KEYS}
    trn = {k: v for k, v in values.items() if k in TRAIN_KEYS}
    try:
        encoder = EncoderConfig(**enc)
        train = TrainConfig(**trn)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if values.get("threads", 1) < 1:
        raise ConfigError(f"{source}: threads must be >= 1")
    rest = {k: v for k, v in values.items() if k in ("dataset", "out_dir", "model_seed", "threads")}
    return RunConfig(encoder=encoder, train=train, **rest)


def load_config(path=None, overrides=(), seed=None) -> RunConfig:
    """File values, then ``key=value`` overrides, then an explicit seed."""
    raw = {}
    source = "<defaults>"
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        raw = parse_lines(text, source)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--override expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in PARSERS:
            raise ConfigError(f"--override: unknown key {key!r}")
        raw[key] = (value, 0)
    if seed is not None:
        raw["seed"] = (str(seed), 0)
    return build_config(raw, source)
