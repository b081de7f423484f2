"""Numerical property checks for the structural results of the model.

Every check returns a :class:`PropertyReport` with margins rather than a bare
boolean; thresholds for "pass" live with the caller.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .kernels import BUMP_C
from .models import ReactionSystem
from .simulate import SimProblem, integrate


@dataclass
class PropertyReport:
    name: str
    trials: int
    failures: int
    worst_margin: float
    witnesses: list = field(default_factory=list)
    seed: int | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _cap_norm(system: ReactionSystem) -> float:
    return float(np.max(np.abs(system.cap_v)))


# ---------------------------------------------------------------------------
# ordering of trajectories

def random_fields(rng: np.random.Generator, system: ReactionSystem, nodes: np.ndarray,
                  count: int, modes: int = 5) -> np.ndarray:
    """Smooth nonnegative fields in ``[0, cap]``, shape ``(m, n, count)``.

    Each component is a sum of ``modes`` sine modes with random amplitudes,
    clipped below at 0 and scaled to a random fraction of the cap.
    """
    m, n = system.m, nodes.size
    out = np.empty((m, n, count))
    for c in range(count):
        for i in range(m):
            freqs = rng.integers(1, 9, size=modes)
            amps = rng.uniform(-1.0, 1.0, size=modes)
            amps[0] = abs(amps[0]) + 0.1
            freqs[0] = 1                      # keeps the field nonzero after clipping
            g = np.clip(amps @ np.sin(np.pi * np.outer(freqs, nodes)), 0.0, None)
            out[i, :, c] = system.cap_v[i] * rng.uniform(0.05, 1.0) * g / np.max(g)
    return out


class _OrderTracker:
    def __init__(self, lower_idx, upper_idx, scale=None):
        self.lo = np.asarray(lower_idx)
        self.hi = np.asarray(upper_idx)
        self.scale = scale
        self.per_pair = np.full(len(self.lo), np.inf)
        self.worst = (np.inf, None)

    def __call__(self, t, u):
        lower = u[..., self.lo]
        if self.scale is not None:
            lower = self.scale * lower
        diff = u[..., self.hi] - lower                 # (m, n, pairs)
        per = diff.min(axis=(0, 1))
        np.minimum(self.per_pair, per, out=self.per_pair)
        j = int(np.argmin(per))
        if per[j] < self.worst[0]:
            i, p = np.unravel_index(np.argmin(diff[..., j]), diff.shape[:2])
            self.worst = (float(per[j]), {"t": float(t), "pair": j, "species": int(i), "node": int(p)})


def check_comparison(problem: SimProblem, pairs: int = 100, t_end: float = 20.0,
                     dt: float = 0.01, tol: float | None = None, seed: int = 0,
                     u_upper=None, u_lower=None) -> PropertyReport:
    """Ordered initial data must stay ordered: ``u_A(0) <= u_B(0)`` implies
    ``u_A(t) <= u_B(t)`` up to ``tol`` (default ``1e-9 * |cap|``).

    Random pairs are ``u_B`` from :func:`random_fields` and ``u_A = beta u_B``;
    explicit pairs may be passed as ``(m, n, pairs)`` arrays instead.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    system = problem.system
    tol = 1e-9 * _cap_norm(system) if tol is None else tol
    if u_upper is None:
        rng = np.random.default_rng(seed)
        u_upper = random_fields(rng, system, problem.grid.nodes, pairs)
        beta = rng.uniform(0.0, 1.0, size=pairs)
        u_lower = beta * u_upper
    pairs = u_upper.shape[-1]
    u0 = np.concatenate([u_lower, u_upper], axis=-1)
    tracker = _OrderTracker(np.arange(pairs), np.arange(pairs, 2 * pairs))
    tracker(0.0, u0)
    integrate(problem.with_u0(u0), t_end, dt, snapshot_every=max(1, int(round(t_end / dt))),
              observer=tracker)
    fails = int(np.sum(tracker.per_pair < -tol))
    worst, wit = tracker.worst
    return PropertyReport("comparison", pairs, fails, worst, [wit] if fails else [], seed,
                          {"tol": tol, "t_end": t_end, "dt": dt})


def check_strong_positivity(problem: SimProblem, u0=None, t_probe: float = 1.0, dt: float = 0.01,
                            tol_pos: float | None = None) -> PropertyReport:
    """A nonnegative nonzero start must become positive at every node and species."""
    system = problem.system
    tol_pos = 1e-12 * _cap_norm(system) if tol_pos is None else tol_pos
    u0 = problem.u0 if u0 is None else np.asarray(u0, dtype=float)
    if not np.any(u0 > 0):
        return PropertyReport("strong_positivity", 0, 0, math.inf, [], details={"vacuous": True})
    traj = integrate(problem.with_u0(u0), t_probe, dt, snapshot_every=max(1, int(round(t_probe / dt))))
    u = traj.final
    lo = float(np.min(u))
    fails = int(np.sum(u <= tol_pos))
    wit = []
    if fails:
        i, p = np.unravel_index(np.argmin(u), u.shape)
        wit.append({"species": int(i), "node": int(p), "value": lo})
    return PropertyReport("strong_positivity", int(u.size), fails, lo - tol_pos, wit,
                          details={"t_probe": t_probe, "tol_pos": tol_pos})


def check_subhomogeneity_dynamics(problem: SimProblem, alpha: float, u0=None, t_end: float = 100.0,
                                  dt: float = 0.01, tol: float | None = None) -> PropertyReport:
    """``u(t; alpha u0) >= alpha u(t; u0)`` along the whole trajectory."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    system = problem.system
    tol = 1e-9 * _cap_norm(system) if tol is None else tol
    u0 = problem.u0 if u0 is None else np.asarray(u0, dtype=float)
    batch = np.stack([u0, alpha * u0], axis=-1)
    # column 1 evolves alpha*u0 and must dominate alpha * column 0
    tracker = _OrderTracker([0], [1], scale=alpha)
    tracker(0.0, batch)
    integrate(problem.with_u0(batch), t_end, dt, snapshot_every=max(1, int(round(t_end / dt))),
              observer=tracker)
    worst, wit = tracker.worst
    fails = int(worst < -tol)
    return PropertyReport("subhomogeneity_dynamics", 1, fails, worst, [wit] if fails else [],
                          details={"alpha": alpha, "t_end": t_end, "tol": tol})


# ---------------------------------------------------------------------------
# the auxiliary bump phi on (0, 1)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(80)
_PANEL_NODES, _PANEL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _psi(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = BUMP_C * np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def _gl(a, b, fn):
    """Gauss-Legendre on ``[a, b]`` (arrays broadcast) with 80 nodes."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    s = mid[..., None] + half[..., None] * _GL_NODES
    return half * np.sum(_GL_WEIGHTS * fn(s), axis=-1)


_PSI_M2 = float(_gl(np.array(-1.0), np.array(1.0), lambda s: s * s * _psi(s)))


@dataclass
class AuxiliaryPhi:
    """C^1 bump, positive exactly on (0, 1).

    Built from the squared-distance profile ``phi0 = min(d/R, 1)^2`` with
    ``d`` the distance to the boundary: the kink of ``phi0`` at ``d = R`` is
    mollified at width ``eps`` and glued back to ``phi0`` by a cosine cut-off
    over ``R - 2 eps < d < R - eps``. Closer to the boundary ``phi = phi0``.
    """

    R: float
    eps: float
    x: np.ndarray
    values: np.ndarray
    derivative: np.ndarray

    def _parts(self, d):
        R, e = self.R, self.eps
        d = np.asarray(d, dtype=float)
        phi0 = np.where(d <= 0, 0.0, np.where(d < R, (d / R) ** 2, 1.0))
        dphi0 = np.where((d > 0) & (d < R), 2.0 * d / R ** 2, 0.0)

        # mollified profile and its derivative
        moll = np.where(d >= R + e, 1.0, (d * d + e * e * _PSI_M2) / R ** 2)
        dmoll = np.where(d >= R + e, 0.0, 2.0 * d / R ** 2)
        zone = (d > R - e) & (d < R + e)
        if np.any(zone):
            dz = d[zone]
            a = (R - dz) / e
            lo = np.full_like(a, -1.0)
            hi = np.ones_like(a)
            quad = _gl(lo, a, lambda s: _psi(s) * ((dz[:, None] + e * s) / R) ** 2)
            flat = _gl(a, hi, _psi)
            moll[zone] = quad + flat
            dmoll[zone] = _gl(lo, a, lambda s: _psi(s) * 2.0 * (dz[:, None] + e * s) / R ** 2)

        arg = np.clip((R - e - d) / e, 0.0, 1.0)
        eta = np.where(d >= R - e, 1.0, np.where(d <= R - 2 * e, 0.0, 0.5 + 0.5 * np.cos(np.pi * arg)))
        deta = np.where((d > R - 2 * e) & (d < R - e), 0.5 * np.pi / e * np.sin(np.pi * arg), 0.0)
        return phi0, dphi0, moll, dmoll, eta, deta

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = np.minimum(x, 1.0 - x)
        phi0, _, moll, _, eta, _ = self._parts(d)
        return np.where(d <= 0, 0.0, eta * moll + (1.0 - eta) * phi0)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        d = np.minimum(x, 1.0 - x)
        phi0, dphi0, moll, dmoll, eta, deta = self._parts(d)
        dd = deta * (moll - phi0) + eta * dmoll + (1.0 - eta) * dphi0
        return np.where(d <= 0, 0.0, np.where(x < 0.5, dd, -dd))

    @property
    def breakpoints(self) -> np.ndarray:
        R, e = self.R, self.eps
        ds = np.array([0.0, R - 2 * e, R - e, R - e / 2, R, R + e / 2, R + e])
        return np.unique(np.concatenate([ds, 1.0 - ds]))


def build_phi(x=None, R: float = 0.25, eps: float | None = None) -> AuxiliaryPhi:
    """Auxiliary bump on the unit interval; ``eps`` defaults to ``R/50``.

    ``x`` is the fine sampling grid (default: 4001 points on ``[-0.5, 1.5]``).
    """
    eps = R / 50.0 if eps is None else eps
    if not (0 < eps < R / 10.0):
        raise ValueError(f"need 0 < eps < R/10 (R={R}, eps={eps})")
    if not (0 < R and R + eps <= 0.5):
        raise ValueError(f"profile does not fit in (0, 1): R={R}, eps={eps}")
    x = np.linspace(-0.5, 1.5, 4001) if x is None else np.asarray(x, dtype=float)
    phi = AuxiliaryPhi(R, eps, x, np.empty(0), np.empty(0))
    phi.values = phi(x)
    phi.derivative = phi.deriv(x)
    return phi


def c1_jump(phi: AuxiliaryPhi, h: float = 1e-9) -> dict:
    """Value and derivative jumps across the breakpoints of ``phi``.

    Uses the analytic derivative just left and right of each breakpoint, so
    the result measures continuity rather than curvature.
    """
    bp = phi.breakpoints
    value = np.abs(phi(bp + h) - phi(bp - h))
    slope = np.abs(phi.deriv(bp + h) - phi.deriv(bp - h))
    return {"value": float(np.max(value)), "derivative": float(np.max(slope))}


def convolve_phi(phi: AuxiliaryPhi, kernel, rho: float, x) -> np.ndarray:
    """``int_0^1 rho J(rho (x - y)) phi(y) dy`` by panel Gauss-Legendre.

    Panels break at the kernel's kinks (shifted to ``x``) and at the bump's
    breakpoints, so each panel integrates a smooth function.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo_k, hi_k = kernel.window if hasattr(kernel, "window") else kernel.support
    kb = np.asarray(getattr(kernel, "breakpoints", ()), dtype=float)
    pb = phi.breakpoints
    out = np.zeros_like(x)
    for idx, xi in enumerate(x):
        a = max(0.0, xi - hi_k / rho)
        b = min(1.0, xi - lo_k / rho)
        if b <= a:
            continue
        cuts = np.concatenate(([a, b], xi - kb / rho, pb))
        cuts = np.unique(cuts[(cuts >= a) & (cuts <= b)])
        left, right = cuts[:-1], cuts[1:]
        keep = right - left > 1e-15
        left, right = left[keep], right[keep]
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        y = (mid[:, None] + half[:, None] * _PANEL_NODES).ravel()
        vals = rho * kernel(rho * (xi - y)) * phi(y)
        out[idx] = float(np.sum((half[:, None] * _PANEL_WEIGHTS).ravel() * vals))
    return out


def check_phi_inequality(phi: AuxiliaryPhi, kernel, rho_list, x=None,
                         quad_tol: float = 1e-8) -> PropertyReport:
    """``int J_rho(x - y) phi(y) dy - phi(x) >= -phi(x)/rho`` on the fine grid.

    The reported threshold is the smallest listed ``rho`` from which every
    larger listed value satisfies the inequality (``None`` if none does).
    """
    com = kernels.center_of_mass(kernel)
    if abs(com) > 1e-8:
        raise ValueError(f"kernel center of mass must be 0, got {com:.6g}")
    x = phi.x if x is None else np.asarray(x, dtype=float)
    fx = phi(x)
    rhos = sorted(float(r) for r in rho_list)
    margins = {}
    witnesses = []
    for r in rhos:
        margin = convolve_phi(phi, kernel, r, x) - fx + fx / r
        j = int(np.argmin(margin))
        margins[r] = float(margin[j])
        if margin[j] < -quad_tol:
            witnesses.append({"rho": r, "x": float(x[j]), "margin": float(margin[j])})
    threshold = None
    for r in reversed(rhos):
        if margins[r] >= -quad_tol:
            threshold = r
        else:
            break
    fails = sum(1 for r in rhos if margins[r] < -quad_tol)
    worst = min(margins.values())
    return PropertyReport("phi_inequality", len(rhos), fails, worst, witnesses,
                          details={"margins": {str(k): v for k, v in margins.items()},
                                   "threshold": threshold, "quad_tol": quad_tol,
                                   "R": phi.R, "eps": phi.eps})


def check_delta_subsolution(system: ReactionSystem, kernel, diffusion, rho_min: float, delta_list,
                            zbar, phi: AuxiliaryPhi, k: float = 0.0,
                            rho_factors=(1.0, 2.0, 5.0, 10.0, 100.0), x=None,
                            tol: float | None = None) -> PropertyReport:
    """Test ``delta zbar phi`` as a subsolution of the frozen-rho equation

    ``D (K_rho u - u) - k u + f(u) >= 0`` at nodes inside (0, 1), for every
    ``delta`` and every ``rho = rho_min * factor``. Deltas whose
    ``delta zbar max(phi)`` exceeds the cap are reported as out of region.
    ``worst_margin`` is normalized by ``delta * max(zbar)``.
    """
    zbar = np.asarray(zbar, dtype=float)
    if zbar.shape != (system.m,) or np.any(zbar <= 0):
        raise ValueError("zbar must be a positive vector of length m")
    d = np.asarray(diffusion, dtype=float)
    if x is None:
        x = phi.x[(phi.x > 0) & (phi.x < 1)]
    rhos = [rho_min * f for f in rho_factors]
    fx = phi(x)
    conv = {r: convolve_phi(phi, kernel, r, x) for r in rhos}
    scale_f = max(1.0, float(np.max(np.abs(system.df0()))), float(np.max(d)))
    region, witnesses = {}, []
    fails = trials = 0
    worst = math.inf
    for delta in delta_list:
        if np.any(delta * zbar * np.max(fx) > system.cap_v):
            region[str(delta)] = "out_of_region"
            continue
        scale = delta * float(np.max(zbar))
        t = 1e-12 * scale * scale_f if tol is None else tol
        u = delta * zbar[:, None] * fx[None, :]
        for r in rhos:
            trials += 1
            margin = d[:, None] * delta * zbar[:, None] * (conv[r] - fx)[None, :] - k * u + system.f(u)
            j = np.unravel_index(np.argmin(margin), margin.shape)
            mv = float(margin[j])
            worst = min(worst, mv / scale)
            ok = mv >= -t
            region[f"{delta}|{r}"] = "pass" if ok else "fail"
            if not ok:
                fails += 1
                witnesses.append({"delta": delta, "rho": r, "species": int(j[0]),
                                  "x": float(x[j[1]]), "margin": mv})
    rho_ok = [r for r in rhos if all(v == "pass" for key, v in region.items()
                                      if key.endswith(f"|{r}"))]
    return PropertyReport("delta_subsolution", trials, fails, worst, witnesses,
                          details={"region": region, "k": k, "rho_min": rho_min,
                                   "rho_all_pass": rho_ok})
