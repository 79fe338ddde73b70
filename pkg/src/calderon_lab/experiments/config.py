"""Configuration for the verification experiments.

A configuration is a JSON object; every field has a default, so ``{}`` is a
valid config.  The seed drives one root generator from which each experiment
derives an independent stream, keyed by its fixed registry index, making
reports reproducible regardless of execution order or parallelism.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..exponents import ExponentFunction

__all__ = ["LabConfig", "ConfigError"]

_DEFAULTS: dict[str, Any] = {
    "seed": 7,
    "exponent": {"form": "constant", "parameters": {"value": 2.0}},
    "grid": {"n": 1, "half_width": 8.0, "points_per_axis": 2048},
    "kernel": {"m": 1},
    "maximal": {"q": 8.0, "gamma": 2.0, "scale_ratio": 2.0 ** 0.25},
    "phi": "gauss",
    "resolution": None,
    "function": {"kind": "indicator", "lo": 0.0, "hi": 1.0},
    "atom": {"center": [0.0], "side": 0.5, "p0": 4.0, "d": None},
    "points": [0.5, 1.0, 2.0],
}


class ConfigError(ValueError):
    """Malformed configuration."""


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class LabConfig:
    raw: dict

    @classmethod
    def from_dict(cls, d: dict | None) -> "LabConfig":
        if d is None:
            d = {}
        if not isinstance(d, dict):
            raise ConfigError("config root must be a JSON object")
        merged = _merge(_DEFAULTS, d)
        try:
            int(merged["seed"])
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None
        return cls(merged)

    @classmethod
    def from_file(cls, path: str) -> "LabConfig":
        with open(path) as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)

    def override(self, **kwargs) -> "LabConfig":
        upd = {k: v for k, v in kwargs.items() if v is not None}
        return LabConfig(_merge(self.raw, upd))

    # --- accessors ----------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def resolution(self) -> int | None:
        r = self.raw.get("resolution")
        return None if r is None else int(r)

    def points_per_axis(self, default: int) -> int:
        """Per-experiment resolution, honoring the global override when set."""
        if self.resolution is None:
            return default
        r = self.resolution
        if r < 16 or (r & (r - 1)) != 0:
            raise ConfigError("resolution must be a power of two >= 16")
        return r

    @property
    def exponent(self) -> ExponentFunction:
        return ExponentFunction.from_dict(self.raw["exponent"])

    @property
    def scale_ratio(self) -> float:
        return float(self.raw["maximal"]["scale_ratio"])

    @property
    def q(self) -> float:
        return float(self.raw["maximal"]["q"])

    @property
    def kernel_m(self) -> int:
        return int(self.raw["kernel"]["m"])

    @property
    def phi_name(self) -> str:
        return str(self.raw["phi"])

    def rng_for(self, index: int) -> np.random.Generator:
        """Independent, reproducible stream for the experiment at registry index."""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(index,)))

    def theorem1_hypothesis(self, n: int, m: int, q: float, p: ExponentFunction) -> bool:
        """n (2m + n/q)^-1 < p_underline."""
        return n / (2.0 * m + n / q) < p.p_underline

    def hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]
