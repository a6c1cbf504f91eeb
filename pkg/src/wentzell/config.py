"""Run configuration: JSON with strict key checking.

Schema (all keys optional, defaults shown by ``RunConfig().to_dict()``)::

    {
      "domain": {"type": "interval", "a": 0, "b": 1, "n": 1024}
             | {"type": "rectangle", "lx": 1, "ly": 1, "nx": 16, "ny": 16},
      "coefficients": {"Q": 1, "alpha": 1, "beta": 1, "gamma": 0, "delta": 0},
      "mode": null | "consistent" | "lumped",
      "order_power": 1,
      "eigen_count": null,
      "times": [0.0, 0.01, ...] | {"start": 0, "stop": 1, "num": 11, "spacing": "linear" | "log"},
      "scheme": {"method": "spectral" | "theta", "theta": 0.5, "dt": 1e-4},
      "initial": {"u1": "1 + cos(pi*x)", "u2": null},
      "output_dir": "out",
      "seed": 0,
      "plots": false
    }

Coefficient values are numbers, expression strings in x (and y), or
``{"cells": [...]}`` / ``{"boundary": [...]}`` tables; Q also accepts a
nested 2x2 list. Optional ``eta`` and ``kappa_Q`` set the lower bounds
checked for alpha, beta and Q (default 0.5). ``u2 = null`` means the trace of u1 (coupled data).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import CoefficientSet
from .errors import ConfigError
from .mesh import Mesh, build_interval_mesh, build_rectangle_mesh

_DOMAIN_KEYS = {"interval": {"type", "a", "b", "n"}, "rectangle": {"type", "lx", "ly", "nx", "ny"}}
_COEF_KEYS = {"Q", "alpha", "beta", "gamma", "delta", "eta", "kappa_Q"}
_SCHEME_KEYS = {"method", "theta", "dt"}
_TIME_KEYS = {"start", "stop", "num", "spacing"}
_INITIAL_KEYS = {"u1", "u2"}


def _strict(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


@dataclass
class RunConfig:
    domain: dict = field(default_factory=lambda: {"type": "interval", "a": 0.0, "b": 1.0, "n": 1024})
    coefficients: dict = field(
        default_factory=lambda: {"Q": 1.0, "alpha": 1.0, "beta": 1.0, "gamma": 0.0, "delta": 0.0}
    )
    mode: str | None = None
    order_power: int = 1
    eigen_count: int | None = None
    times: object = field(default_factory=lambda: {"start": 0.0, "stop": 0.1, "num": 11, "spacing": "linear"})
    scheme: dict = field(default_factory=lambda: {"method": "spectral", "theta": 0.5, "dt": 1e-4})
    initial: dict = field(default_factory=lambda: {"u1": "1 + cos(pi*x)", "u2": None})
    output_dir: str = "out"
    seed: int = 0
    plots: bool = False

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        _strict(d, {f for f in cls.__dataclass_fields__}, "config")
        base = cls()
        merged = {}
        for k in cls.__dataclass_fields__:
            if k not in d:
                continue
            v = d[k]
            default = getattr(base, k)
            if isinstance(default, dict) and k != "times" and isinstance(v, dict):
                if k == "domain":
                    v = dict(v)  # domain is replaced as a whole
                else:
                    v = {**default, **v}
            merged[k] = v
        return cls(**merged)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def validate(self):
        dom = self.domain
        if not isinstance(dom, dict) or dom.get("type") not in _DOMAIN_KEYS:
            raise ConfigError("domain.type must be 'interval' or 'rectangle'")
        _strict(dom, _DOMAIN_KEYS[dom["type"]], "domain")
        _strict(self.coefficients, _COEF_KEYS, "coefficients")
        _strict(self.scheme, _SCHEME_KEYS, "scheme")
        _strict(self.initial, _INITIAL_KEYS, "initial")
        if self.mode not in (None, "consistent", "lumped"):
            raise ConfigError("mode must be null, 'consistent' or 'lumped'")
        if self.scheme.get("method") not in ("spectral", "theta"):
            raise ConfigError("scheme.method must be 'spectral' or 'theta'")
        if not isinstance(self.order_power, int) or self.order_power < 1:
            raise ConfigError("order_power must be a positive integer")
        if self.eigen_count is not None and not isinstance(self.eigen_count, int):
            raise ConfigError("eigen_count must be an integer or null")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if isinstance(self.times, dict):
            _strict(self.times, _TIME_KEYS, "times")
            if self.times.get("spacing", "linear") not in ("linear", "log"):
                raise ConfigError("times.spacing must be 'linear' or 'log'")
        elif not isinstance(self.times, list):
            raise ConfigError("times must be a list or a {start, stop, num, spacing} object")

    # builders

    def build_mesh(self) -> Mesh:
        d = self.domain
        if d["type"] == "interval":
            return build_interval_mesh(float(d.get("a", 0.0)), float(d.get("b", 1.0)), int(d.get("n", 1024)))
        return build_rectangle_mesh(float(d.get("lx", 1.0)), float(d.get("ly", 1.0)),
                                    int(d.get("nx", 16)), int(d.get("ny", 16)))

    def build_coefficients(self) -> CoefficientSet:
        c = {**RunConfig().coefficients, **self.coefficients}
        extra = {k: float(c[k]) for k in ("eta", "kappa_Q") if k in c}
        return CoefficientSet(Q=c["Q"], alpha=c["alpha"], beta=c["beta"], gamma=c["gamma"], delta=c["delta"], **extra)

    def time_grid(self) -> np.ndarray:
        t = self.times
        if isinstance(t, list):
            grid = np.asarray(t, dtype=float)
        else:
            start, stop, num = float(t.get("start", 0.0)), float(t["stop"]), int(t.get("num", 11))
            if t.get("spacing", "linear") == "log":
                if start <= 0:
                    raise ConfigError("log time spacing needs start > 0")
                grid = np.geomspace(start, stop, num)
            else:
                grid = np.linspace(start, stop, num)
        if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) < 0):
            raise ConfigError("times must be non-empty, non-negative and ascending")
        return grid


def reference_config() -> RunConfig:
    return RunConfig()
