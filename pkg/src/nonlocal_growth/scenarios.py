"""Scenario configuration: the four worked cases and custom JSON configs.

A scenario is a flat record. ``resolve`` merges, in order, the defaults, the
preset of the chosen case, the JSON config file and command-line overrides,
then validates the result. The resolved record is what the manifest echoes.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import discretization, growth, kernels, models
from .simulate import SimProblem, stable_dt, wn_initial

OUTPUTS = ("timeseries", "heatmap", "spectral", "steady", "verify")


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass
class Scenario:
    case: int | None = None
    kernel: str = "tent"
    growth: str = "case1"
    growth_params: dict = field(default_factory=dict)
    model: str = "west_nile"
    model_params: dict = field(default_factory=dict)
    grid_n: int = 400
    dt: float = 0.01
    t_end: float = 500.0
    snapshot_dt: float = 5.0
    emit: tuple = ("timeseries", "heatmap", "spectral")
    out_dir: str = "out"
    strict_k: bool = False
    wide: bool = False
    spectral_n: int = 200
    spectral_dt: float = 1e-3
    verify_n: int = 100
    verify_pairs: int = 20
    seed: int = 0

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["emit"] = list(self.emit)
        return d


CASES = {
    1: {"kernel": "tent", "growth": "case1", "t_end": 500.0},
    2: {"kernel": "tent", "growth": "case2", "t_end": 500.0},
    3: {"kernel": "tent", "growth": "case3", "t_end": 200.0},
    4: {"kernel": "case4_asymmetric", "growth": "case1", "t_end": 200.0},
}


def _coerce(name: str, value):
    ftype = {f.name: f for f in dataclasses.fields(Scenario)}[name].type
    try:
        if name == "emit":
            items = value.split(",") if isinstance(value, str) else list(value)
            items = tuple(s.strip() for s in items if s.strip())
            bad = [s for s in items if s not in OUTPUTS]
            if bad:
                raise ConfigError(f"unknown outputs {bad}; choose from {list(OUTPUTS)}")
            return items
        if name == "case":
            return None if value is None else int(value)
        if ftype == "int":
            if float(value) != int(value):
                raise ConfigError(f"{name} must be an integer")
            return int(value)
        if ftype == "float":
            return float(value)
        if ftype == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"{name} must be true or false")
            return value
        if ftype == "dict":
            if not isinstance(value, dict):
                raise ConfigError(f"{name} must be an object")
            return dict(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {name}: {value!r}") from None


def resolve(config: dict | None = None, **overrides) -> Scenario:
    """Defaults, then case preset, then ``config``, then non-None ``overrides``."""
    merged: dict = {}
    known = {f.name for f in dataclasses.fields(Scenario)}
    sources = [config or {}, {k: v for k, v in overrides.items() if v is not None}]
    unknown = sorted(set().union(*sources) - known)
    if unknown:
        raise ConfigError(f"unknown config fields {unknown}")
    case = None
    for src in sources:
        if src.get("case") is not None:
            case = _coerce("case", src["case"])
    if case is not None:
        if case not in CASES:
            raise ConfigError(f"case must be one of {sorted(CASES)}, got {case}")
        merged.update(CASES[case])
    for src in sources:
        merged.update(src)
    merged["case"] = case
    sc = Scenario(**{k: _coerce(k, v) for k, v in merged.items()})
    validate(sc)
    return sc


def load_config(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def validate(sc: Scenario) -> None:
    for name in ("grid_n", "spectral_n", "verify_n"):
        if getattr(sc, name) < 2:
            raise ConfigError(f"{name} must be >= 2")
    for name in ("dt", "t_end", "snapshot_dt", "spectral_dt"):
        if not getattr(sc, name) > 0:
            raise ConfigError(f"{name} must be positive")
    if sc.verify_pairs < 1:
        raise ConfigError("verify_pairs must be >= 1")
    steps = sc.t_end / sc.dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError(f"dt={sc.dt} must divide t_end={sc.t_end}")
    every = sc.snapshot_dt / sc.dt
    if abs(every - round(every)) > 1e-9 * max(1.0, every):
        raise ConfigError(f"dt={sc.dt} must divide snapshot_dt={sc.snapshot_dt}")
    # building resolves every label and raises ConfigError on failure
    problem = build_problem(sc)
    limit = stable_dt(problem, horizon=max(sc.t_end, 1.0))
    if sc.dt > limit:
        raise ConfigError(f"dt={sc.dt} exceeds the stability bound {limit:.4g}")


def build_system(sc: Scenario) -> models.ReactionSystem:
    try:
        return models.by_label(sc.model, sc.model_params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from None


def build_kernel(sc: Scenario):
    try:
        return kernels.by_label(sc.kernel)
    except (KeyError, OSError, ValueError) as exc:
        raise ConfigError(f"kernel: {exc}") from None


def build_growth(sc: Scenario) -> growth.GrowthProfile:
    try:
        return growth.by_label(sc.growth, sc.growth_params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"growth: {exc}") from None


def diffusion_of(sc: Scenario, system: models.ReactionSystem) -> np.ndarray:
    if sc.model == "west_nile":
        return models.WNParams(**sc.model_params).diffusion
    return np.ones(system.m)


def initial_state(system: models.ReactionSystem, grid: discretization.Grid) -> np.ndarray:
    """The worked-example data for West Nile; ``cap/2 * sin(pi y)`` otherwise."""
    if system.label == "west_nile":
        return wn_initial(grid)
    return 0.5 * system.cap_v[:, None] * np.sin(np.pi * grid.nodes)[None, :]


def build_problem(sc: Scenario, n: int | None = None) -> SimProblem:
    system = build_system(sc)
    grid = discretization.build_grid(n or sc.grid_n)
    try:
        return SimProblem(system, build_kernel(sc), build_growth(sc), grid,
                          diffusion_of(sc, system), initial_state(system, grid))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
