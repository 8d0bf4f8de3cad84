"""Service configuration: JSON file keys with environment overrides."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict

from .errors import ConfigError

ENV_PREFIX = "PULSELABEL_"

# config file key -> (attribute, parser)
_KEYS = {
    "window_s": ("window_s", float),
    "period_s": ("period_s", float),
    "fs": ("fs", float),
    "N_initial": ("n_initial", int),
    "K_regions": ("k_regions", int),
    "quota": ("quota", int),
    "D": ("coverage_d", float),
    "p_floor": ("p_floor", float),
    "seed": ("seed", int),
    "quota_overrides_floor": ("quota_overrides_floor", bool),
    "checkpoint_every": ("checkpoint_every", int),
    "store_raw": ("store_raw", bool),
}


@dataclass
class Config:
    window_s: float = 120.0
    period_s: float = 900.0
    fs: float = 20.0
    n_initial: int = 100
    k_regions: int = 10
    quota: int = 15
    coverage_d: float = 1.5
    p_floor: float = 0.1
    seed: int = 7
    quota_overrides_floor: bool = True
    checkpoint_every: int = 50
    store_raw: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def window_samples(self) -> int:
        return int(round(self.window_s * self.fs))


def _parse(raw, parser, key):
    if parser is bool and isinstance(raw, str):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {key}={raw!r}")
    try:
        return parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse {key}={raw!r}: {exc}") from exc


def load_config(path=None, env=None, **overrides) -> Config:
    """Defaults, then config file, then environment, then explicit overrides."""
    env = os.environ if env is None else env
    cfg = Config()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        for key, raw in data.items():
            if key not in _KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            attr, parser = _KEYS[key]
            setattr(cfg, attr, _parse(raw, parser, key))
    for key, (attr, parser) in _KEYS.items():
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            setattr(cfg, attr, _parse(raw, parser, key))
    for attr, value in overrides.items():
        if value is None:
            continue
        if not hasattr(cfg, attr):
            raise ConfigError(f"unknown config attribute {attr!r}")
        setattr(cfg, attr, value)
    if not (0.0 <= cfg.p_floor <= 1.0):
        raise ConfigError("p_floor must be in [0, 1]")
    if cfg.k_regions > cfg.n_initial:
        raise ConfigError("K_regions cannot exceed N_initial")
    return cfg
