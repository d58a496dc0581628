"""Flat ``key = value`` run configuration.

One key per line, ``#`` starts a comment, unknown keys and malformed values raise
ConfigError. Lists are comma separated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .geometry import InterfaceCurve
from .potential import Potential

MODES = ("profile", "stokes-check", "simulate", "spectral", "sharp", "converge")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "simulate"
    # diffuse model
    eps: float = 0.04
    N: int = 128
    dt: float = 0.0
    T: float = 0.05
    L: float = 1.0
    alpha0: float = 1.0
    delta: float = 0.045
    a4: float = 0.25
    a3: float = 0.0
    a2: float = -0.5
    a1: float = 0.0
    a0: float = 0.25
    tension: float = 1.0
    scheme: str = "cs1"
    c_bound: float = 1.2
    stokes_tol: float = 1e-10
    snapshot_every: int = 0
    # initial curve: a circle unless curve_file is given
    radius: float = 0.25
    center_x: float = 0.5
    center_y: float = 0.5
    curve_file: str = ""
    # converge mode
    eps_list: list = field(default_factory=lambda: [0.08, 0.04, 0.02])
    cells_per_eps: float = 16.0
    dt_per_eps: float = 0.0
    error_every: float = 5e-4
    # spectral mode
    spectral_eps: list = field(default_factory=lambda: [0.1, 0.05, 0.025])
    spectral_delta: float = 0.5
    n_samples: int = 50
    # sharp mode
    sharp_dt: float = 1e-5
    # stokes-check mode
    stokes_grids: list = field(default_factory=lambda: [64, 128, 256])
    # run control
    out: str = "out"
    seed: int = 0
    threads: int = 1

    @property
    def potential(self) -> Potential:
        return Potential(self.a4, self.a3, self.a2, self.a1, self.a0)

    @property
    def center(self):
        return (self.center_x, self.center_y)

    def curve(self) -> InterfaceCurve:
        if self.curve_file:
            return InterfaceCurve.from_csv(self.curve_file)
        return InterfaceCurve.circle(self.radius, self.center)

    def grid_for(self, eps: float) -> int:
        """N = ceil(cells_per_eps L / eps) rounded up to a multiple of 8."""
        n = math.ceil(self.cells_per_eps * self.L / eps - 1e-9)
        return int(8 * math.ceil(n / 8))

    def dt_for(self, eps: float, N: int) -> float | None:
        if self.dt_per_eps > 0:
            return self.dt_per_eps * eps
        return self.dt if self.dt > 0 else None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.scheme not in ("cs1", "bdf2"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        for k in ("eps", "L", "delta", "stokes_tol", "radius", "sharp_dt", "error_every", "cells_per_eps"):
            if getattr(self, k) <= 0:
                raise ConfigError(f"{k} must be positive")
        if self.N < 4:
            raise ConfigError("N must be at least 4")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.mode == "converge":
            e = self.eps_list
            if len(e) < 3:
                raise ConfigError("converge mode needs at least 3 values in eps_list")
            if any(b >= a for a, b in zip(e, e[1:])):
                raise ConfigError("eps_list must be strictly decreasing")

    def echo(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ", ".join(repr(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _convert(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            kind = type(default[0]) if default else float
            return [kind(x) for x in items]
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(cfg)}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (x.strip() for x in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        setattr(cfg, key, _convert(key, raw, getattr(cfg, key)))
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
