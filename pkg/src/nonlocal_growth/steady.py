"""Long-time states: stationary ``u*``, periodic ``u*_T`` and the ODE equilibrium ``w_e``.

Stationary and periodic states are found by marching the frozen (or purely
periodic) system, which is exactly the iteration the attractivity results
guarantee to converge. The stationary search squeezes from both sides: once
from the cap vector and once from a small multiple of the principal
eigenvector, and the two limits must coincide.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import discretization, growth, spectral
from .discretization import Grid
from .models import ReactionSystem
from .simulate import SimProblem, apply_nonlocal, integrate, rhs_with, solve_limit_ode


class SteadyConvergenceError(RuntimeError):
    pass


@dataclass
class SteadyResult:
    state: np.ndarray
    kind: str                      # stationary | periodic | ode_equilibrium
    residual: float
    iterations: int
    bound: float | None = None
    times: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def stationary_residual(system: ReactionSystem, kernel, rho: float, grid: Grid, diffusion,
                        u: np.ndarray) -> float:
    """``max |D (K u - u) + f(u)|`` with ``K`` assembled afresh."""
    K = discretization.operator_entries(kernel, rho, grid)
    d = np.asarray(diffusion, dtype=float)[:, None]
    return float(np.max(np.abs(d * (apply_nonlocal(K, u) - u) + system.f(u))))


def autonomous_state(system: ReactionSystem, kernel, rho_inf: float, grid: Grid, diffusion,
                     tol: float = 1e-8, dt: float = 0.02, chunk: float = 10.0,
                     max_time: float = 50_000.0) -> SteadyResult:
    """Positive steady state of the frozen system at ``rho = rho_inf``.

    Returns the zero state when ``lambda* <= 0``.
    """
    m, n = system.m, grid.n_nodes
    gen = spectral.build_generator(system, kernel, grid, rho_inf, diffusion)
    rep = spectral.spectral_bound_autonomous(gen)
    if rep.value <= 0:
        return SteadyResult(np.zeros((m, n)), "stationary", 0.0, 0, bound=rep.value,
                            info={"classification": spectral.classify(rep.value)})

    cap = system.cap_v
    z = rep.eigvec.reshape(m, n)
    delta = 1e-4 * float(np.min(cap)) / float(np.max(np.abs(z)))
    u0 = np.stack([np.broadcast_to(cap[:, None], (m, n)), delta * z], axis=-1)
    prob = SimProblem(system, kernel, growth.fixed(rho_inf), grid, diffusion, u0)

    K = discretization.operator_entries(kernel, rho_inf, grid)
    steps_per_chunk = int(round(chunk / dt))
    u = u0.copy()
    t = 0.0
    order_violation = 0.0
    iterations = 0
    while t < max_time:
        traj = integrate(prob.with_u0(u), t + chunk, dt, snapshot_every=steps_per_chunk,
                         check_dt=(iterations == 0), t0=t)
        u = traj.final.copy()
        t += chunk
        iterations += steps_per_chunk
        order_violation = min(order_violation, float(np.min(u[..., 0] - u[..., 1])))
        res = float(np.max(np.abs(rhs_with(K, prob, t, u))))
        gap = float(np.max(np.abs(u[..., 0] - u[..., 1])))
        if res <= tol and gap <= 10.0 * tol:
            state = 0.5 * (u[..., 0] + u[..., 1])
            return SteadyResult(
                state, "stationary",
                stationary_residual(system, kernel, rho_inf, grid, diffusion, state),
                iterations, bound=rep.value,
                info={"bracket_gap": gap, "time": t, "order_violation": order_violation,
                      "delta": delta, "classification": spectral.classify(rep.value)})
    raise SteadyConvergenceError(
        f"upper/lower marches did not meet within {max_time} (residual {res:.2e}, gap {gap:.2e})")


def periodic_state(system: ReactionSystem, kernel, profile: growth.GrowthProfile, period: float,
                   grid: Grid, diffusion, tol: float = 1e-8, dt: float = 0.01,
                   k_max: int = 500, samples: int = 200, bound: float | None = None,
                   bound_dt: float | None = None) -> SteadyResult:
    """Positive ``period``-periodic orbit under the purely periodic ``profile``.

    ``tol`` bounds ``max |u((k+1)T) - u(kT)|``. The returned state holds the
    last full period at ``samples`` equally spaced times. Supplying ``bound``
    (``lambda*_T``) skips its computation.
    """
    m, n = system.m, grid.n_nodes
    if bound is None:
        fam = spectral.periodic_family(system, kernel, grid, diffusion, profile, period)
        bound = spectral.periodic_bound(fam, period, bound_dt or dt).value
    if bound >= 0:
        return SteadyResult(np.zeros((samples + 1, m, n)), "periodic", 0.0, 0, bound=bound,
                            times=np.linspace(0.0, period, samples + 1),
                            info={"classification": spectral.classify(-bound)})

    steps = int(round(period / dt))
    every = steps // samples
    if every * samples != steps:
        raise ValueError("period/dt must be a multiple of samples")
    u = np.broadcast_to(system.cap_v[:, None], (m, n)).copy()
    prob = SimProblem(system, kernel, profile, grid, diffusion, u)
    for k in range(1, k_max + 1):
        t0 = (k - 1) * period
        traj = integrate(prob.with_u0(u), t0 + period, dt, snapshot_every=every,
                         check_dt=(k == 1), t0=t0)
        change = float(np.max(np.abs(traj.final - u)))
        u = traj.final.copy()
        if change <= tol:
            rel = change / float(np.max(np.abs(u)))
            return SteadyResult(traj.states, "periodic", change, k, bound=bound,
                                times=traj.times - t0,
                                info={"relative_period_change": rel,
                                      "classification": spectral.classify(-bound)})
    raise SteadyConvergenceError(f"no periodic convergence within {k_max} periods (last change {change:.2e})")


def ode_equilibrium(system: ReactionSystem, k: float = 0.0, tol: float = 1e-8,
                    max_newton: int = 100) -> SteadyResult:
    """Positive equilibrium of ``w' = -k w + f(w)``, or 0 when ``s(A) <= 0``."""
    m = system.m
    A = spectral.limit_matrix(system, k)
    sA = spectral.ode_bound(A).value
    if sA <= 0:
        return SteadyResult(np.zeros(m), "ode_equilibrium", 0.0, 0, bound=sA)

    def F(w):
        return -k * w + system.f(w)

    def J(w):
        return -k * np.eye(m) + system.jacobian(w)

    def newton(w):
        r = np.max(np.abs(F(w)))
        for it in range(1, max_newton + 1):
            step = np.linalg.solve(J(w), -F(w))
            lam = 1.0
            while lam > 1e-8:
                trial = np.clip(w + lam * step, 0.0, system.cap_v)
                rt = np.max(np.abs(F(trial)))
                if rt < r:
                    break
                lam *= 0.5
            else:
                return w, r, it
            w, r = trial, rt
            if r <= tol:
                return w, r, it
        return w, r, max_newton

    positive_floor = 1e-6 * float(np.min(system.cap_v))
    w, r, its = newton(system.cap_v / 2.0)
    method = "newton"
    if r > tol or np.min(w) <= positive_floor:
        traj = solve_limit_ode(system, k, system.cap_v, t_end=2000.0, dt=0.01, snapshot_every=100_000)
        w, r, extra = newton(traj.states[-1])
        its += extra
        method = "ode+newton"
        if r > tol or np.min(w) <= positive_floor:
            raise SteadyConvergenceError(f"equilibrium search failed (residual {r:.2e})")
    return SteadyResult(w, "ode_equilibrium", float(r), its, bound=sA, info={"method": method})
