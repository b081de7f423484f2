"""Explicit RK4 for the fixed-domain form of the growing-domain system.

On the reference interval the equations read::

    u_t = D (K(rho(t)) u - u) - (rho_dot/rho) u + f(u)

where ``K(rho)`` is the assembled rescaled-kernel matrix. States have shape
``(m, n)`` or ``(m, n, batch)``; batches integrate independent initial data
through the same matrix products.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import discretization
from .discretization import Grid
from .growth import GrowthProfile
from .models import ReactionSystem, lipschitz_bound

# relative drift in rho that triggers re-assembly of K
K_REFRESH = 1e-3
OVERSHOOT_TOL = 1e-9


class IntegrationError(RuntimeError):
    """Non-finite state encountered."""

    def __init__(self, msg: str, t: float):
        super().__init__(f"{msg} at t={t:.6g}")
        self.t = t


class StabilityError(IntegrationError):
    """State left the invariant box by more than the clamping tolerance."""


@dataclass
class SimProblem:
    system: ReactionSystem
    kernel: object
    growth: GrowthProfile
    grid: Grid
    diffusion: np.ndarray
    u0: np.ndarray

    def __post_init__(self):
        self.diffusion = np.asarray(self.diffusion, dtype=float)
        self.u0 = np.asarray(self.u0, dtype=float)
        m, n = self.system.m, self.grid.n_nodes
        if self.diffusion.shape != (m,) or np.any(self.diffusion < 0):
            raise ValueError(f"diffusion must be {m} nonnegative rates")
        if self.u0.shape[:2] != (m, n):
            raise ValueError(f"u0 must have leading shape {(m, n)}, got {self.u0.shape}")
        cap = self.system.cap_v.reshape((m,) + (1,) * (self.u0.ndim - 1))
        if np.any(self.u0 < 0) or np.any(self.u0 > cap):
            raise ValueError("u0 must lie in [0, cap_v] componentwise")

    def with_u0(self, u0) -> SimProblem:
        return SimProblem(self.system, self.kernel, self.growth, self.grid, self.diffusion, u0)

    def fingerprint(self) -> str:
        """Stable hash of everything that determines a trajectory."""
        h = hashlib.sha256()
        meta = {
            "system": self.system.label,
            "params": self.system.params,
            "kernel": getattr(self.kernel, "label", repr(self.kernel)),
            "growth": self.growth.label,
            "growth_params": self.growth.params,
            "n": self.grid.n_nodes,
            "diffusion": self.diffusion.tolist(),
        }
        h.update(json.dumps(meta, sort_keys=True, default=str).encode())
        h.update(np.ascontiguousarray(self.u0).tobytes())
        return h.hexdigest()[:16]


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray              # (snapshots, m, n[, batch])
    dt_used: float
    scheme: str
    scenario_hash: str
    species: tuple[str, ...] = ()
    nodes: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _expand(vec, ndim):
    return vec.reshape((-1,) + (1,) * (ndim - 1))


class OperatorCache:
    """Holds ``K(rho)``, re-assembling when rho drifts past ``K_REFRESH``."""

    def __init__(self, kernel, grid: Grid, refresh: float = K_REFRESH):
        self.kernel = kernel
        self.grid = grid
        self.refresh = refresh
        self.rho = None
        self.K = None
        self.assemblies = 0

    def get(self, rho: float, force: bool = False) -> np.ndarray:
        if force or self.rho is None or abs(rho - self.rho) > self.refresh * self.rho:
            self.K = discretization.operator_entries(self.kernel, rho, self.grid)
            self.rho = rho
            self.assemblies += 1
        return self.K


def apply_nonlocal(K: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``K`` applied along the node axis of every species (and batch column)."""
    if u.ndim == 2:
        return u @ K.T
    return np.matmul(K, u)


def rhs_with(K, problem: SimProblem, t: float, u: np.ndarray) -> np.ndarray:
    d = _expand(problem.diffusion, u.ndim)
    rate = float(problem.growth.rho_dot(np.float64(t)) / problem.growth.rho(np.float64(t)))
    return d * (apply_nonlocal(K, u) - u) - rate * u + problem.system.f(u)


def rhs(problem: SimProblem, t: float, u) -> np.ndarray:
    """Time derivative of the state at ``t`` (assembles ``K(rho(t))`` fresh)."""
    u = np.asarray(u, dtype=float)
    K = discretization.operator_entries(problem.kernel, float(problem.growth.rho(np.float64(t))),
                                        problem.grid)
    return rhs_with(K, problem, t, u)


def stable_dt(problem: SimProblem, horizon: float = 1e3) -> float:
    """Largest step permitted: ``0.5 / (2 max d_i + L)`` with ``L`` the sampled
    Lipschitz bound of ``f`` plus the largest dilution rate on ``[0, horizon]``."""
    ts = np.linspace(0.0, horizon, 2001)
    dil = float(np.max(np.abs(problem.growth.rho_dot(ts) / problem.growth.rho(ts))))
    L = lipschitz_bound(problem.system) + dil
    return 0.5 / (2.0 * float(np.max(problem.diffusion)) + L)


def _rk4_step(F, t, u, dt):
    k1 = F(t, u)
    k2 = F(t + 0.5 * dt, u + (0.5 * dt) * k1)
    k3 = F(t + 0.5 * dt, u + (0.5 * dt) * k2)
    k4 = F(t + dt, u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _guard(u, cap, t):
    if not np.all(np.isfinite(u)):
        raise IntegrationError("non-finite state", t)
    capx = _expand(cap, u.ndim)
    slack = OVERSHOOT_TOL * float(np.max(cap))
    lo = float(np.min(u))
    hi = float(np.max(u - capx))
    if lo < -slack or hi > slack:
        raise StabilityError(
            f"state left [0, cap] (undershoot {max(0.0, -lo):.3e}, overshoot {max(0.0, hi):.3e});"
            " reduce dt", t)
    if lo < 0 or hi > 0:
        np.clip(u, 0.0, capx, out=u)
    return u


def integrate(problem: SimProblem, t_end: float, dt: float = 0.01, snapshot_every: int = 1,
              strict_k: bool = False, check_dt: bool = True,
              observer: Callable[[float, np.ndarray], None] | None = None,
              t0: float = 0.0, k_refresh: float = K_REFRESH) -> Trajectory:
    """March from ``t0`` to ``t_end`` with classical RK4.

    Within a step the nonlocal matrix is frozen at its start-of-step value and
    refreshed when rho drifts by more than ``K_REFRESH``; ``strict_k``
    assembles at every stage instead. ``observer(t, u)`` sees every step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be >= 1")
    if check_dt:
        limit = stable_dt(problem, horizon=max(t_end, 1.0))
        if dt > limit:
            raise ValueError(f"dt={dt} exceeds stability bound {limit:.4g}")
    steps = int(round((t_end - t0) / dt))
    if steps < 0 or abs(t0 + steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("dt must divide t_end - t0")

    cache = OperatorCache(problem.kernel, problem.grid, k_refresh)
    cap = problem.system.cap_v
    growth = problem.growth

    if strict_k:
        def F(t, u):
            K = discretization.operator_entries(problem.kernel, float(growth.rho(np.float64(t))),
                                                problem.grid)
            return rhs_with(K, problem, t, u)
    else:
        frozen = {}

        def F(t, u):
            return rhs_with(frozen["K"], problem, t, u)

    u = problem.u0.copy()
    times = [t0]
    snaps = [u.copy()]
    t = t0
    for k in range(1, steps + 1):
        if not strict_k:
            frozen["K"] = cache.get(float(growth.rho(np.float64(t))))
        u = _rk4_step(F, t, u, dt)
        t = t0 + k * dt
        u = _guard(u, cap, t)
        if observer is not None:
            observer(t, u)
        if k % snapshot_every == 0 or k == steps:
            times.append(t)
            snaps.append(u.copy())
    return Trajectory(
        times=np.array(times),
        states=np.array(snaps),
        dt_used=dt,
        scheme="rk4-strict-k" if strict_k else "rk4",
        scenario_hash=problem.fingerprint(),
        species=problem.system.species,
        nodes=problem.grid.nodes,
        meta={"assemblies": cache.assemblies if not strict_k else 4 * steps},
    )


@dataclass
class OdeTrajectory:
    times: np.ndarray
    states: np.ndarray              # (snapshots, m)
    dt_used: float


def solve_limit_ode(system: ReactionSystem, k: float, w0, t_end: float, dt: float = 0.01,
                    snapshot_every: int = 1) -> OdeTrajectory:
    """RK4 for the spatially homogeneous limit ``w' = -k w + f(w)``."""
    w = np.asarray(w0, dtype=float).copy()
    if w.shape != (system.m,):
        raise ValueError(f"w0 must have shape ({system.m},)")
    if np.any(w < 0) or np.any(w > system.cap_v):
        raise ValueError("w0 must lie in [0, cap_v]")
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = int(round(t_end / dt))

    def F(_t, x):
        return -k * x + system.f(x)

    times, snaps = [0.0], [w.copy()]
    for i in range(1, steps + 1):
        w = _rk4_step(F, (i - 1) * dt, w, dt)
        w = _guard(w, system.cap_v, i * dt)
        if i % snapshot_every == 0 or i == steps:
            times.append(i * dt)
            snaps.append(w.copy())
    return OdeTrajectory(np.array(times), np.array(snaps), dt)


@dataclass
class PhysicalFrame:
    """Samples of the solution on the moving domain ``(0, rho(t))``."""

    times: np.ndarray
    x: np.ndarray                   # (snapshots, n)
    values: np.ndarray              # (snapshots, m, n)
    rho: np.ndarray
    species: tuple[str, ...] = ()

    def at(self, index: int, x) -> np.ndarray:
        """Linear interpolation in snapshot ``index``; zero outside the domain."""
        x = np.asarray(x, dtype=float)
        out = np.stack([np.interp(x, self.x[index], v) for v in self.values[index]])
        outside = (x <= 0.0) | (x >= self.rho[index])
        out[:, outside] = 0.0
        return out


def remap_physical(trajectory: Trajectory, growth: GrowthProfile) -> PhysicalFrame:
    """Map reference node ``y`` to ``x = rho(t) y`` for every snapshot."""
    rho = growth.rho(trajectory.times)
    x = rho[:, None] * trajectory.nodes[None, :]
    return PhysicalFrame(trajectory.times, x, trajectory.states, rho, trajectory.species)


def wn_initial(grid: Grid) -> np.ndarray:
    """Initial data of the West Nile cases: ``sin(y/2)`` and ``0.5 y - 0.5 y^2``."""
    y = grid.nodes
    return np.stack([np.sin(y / 2.0), 0.5 * y - 0.5 * y * y])
