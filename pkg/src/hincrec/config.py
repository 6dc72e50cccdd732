"""Plain ``key = value`` configuration files for training and generation."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Union

from .synth import SynthConfig


class ConfigError(Exception):
    """Unknown key, bad value, or unreadable config file."""


@dataclass
class TrainConfig:
    seed: int = 42
    d: int = 64                   # user embedding dimension
    L: int = 8                    # attention heads
    N: int = 10                   # walks sampled per (user, meta-path)
    l: int = 5                    # max walk length (>= longest pattern)
    E: int = 2000                 # reinforcement episodes
    T: int = 20                   # episode horizon
    gamma: float = 0.9
    epsilon: float = 0.18
    lam: float = 0.08             # entropy regularization weight
    lr_pretrain: float = 0.001
    lr_rl: float = 0.0001
    batch: int = 8
    pretrain_episodes: int = 10_000


# File keys as written by users; "lambda" is a keyword so it maps to lam.
_TRAIN_KEYS = {
    "seed": "seed",
    "d": "d",
    "L": "L",
    "N": "N",
    "l": "l",
    "E": "E",
    "T": "T",
    "gamma": "gamma",
    "epsilon": "epsilon",
    "lambda": "lam",
    "lr_pretrain": "lr_pretrain",
    "lr_rl": "lr_rl",
    "batch": "batch",
    "pretrain_episodes": "pretrain_episodes",
}

_SYNTH_KEYS = {
    "users": "users",
    "concepts": "concepts",
    "clusters": "clusters",
    "courses": "courses",
    "videos": "videos",
    "p_in": "p_in",
    "p_out": "p_out",
    "clicks": "clicks_per_user",
    "seed": "seed",
}


def _parse_kv(path: Union[str, Path]) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            pairs[key.strip()] = value.strip()
    return pairs


def _coerce(cls, field_name: str, text: str, path, key: str):
    target = next(f.type for f in fields(cls) if f.name == field_name)
    caster = float if target == "float" else int
    try:
        return caster(text)
    except ValueError:
        raise ConfigError(f"{path}: bad value {text!r} for key {key!r}") from None


def load_train_config(path: Union[str, Path]) -> TrainConfig:
    cfg = TrainConfig()
    for key, text in _parse_kv(path).items():
        field_name = _TRAIN_KEYS.get(key)
        if field_name is None:
            raise ConfigError(f"{path}: unknown training key {key!r}")
        setattr(cfg, field_name, _coerce(TrainConfig, field_name, text, path, key))
    if cfg.d % cfg.L != 0:
        raise ConfigError(f"{path}: L ({cfg.L}) must divide d ({cfg.d})")
    return cfg


def load_synth_config(path: Union[str, Path]) -> SynthConfig:
    cfg = SynthConfig()
    for key, text in _parse_kv(path).items():
        field_name = _SYNTH_KEYS.get(key)
        if field_name is None:
            raise ConfigError(f"{path}: unknown generator key {key!r}")
        caster = float if field_name in ("p_in", "p_out") else int
        try:
            setattr(cfg, field_name, caster(text))
        except ValueError:
            raise ConfigError(f"{path}: bad value {text!r} for key {key!r}") from None
    return cfg
