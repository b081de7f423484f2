"""Threshold quantities from the linearization at zero.

Three regimes, three numbers:

* fixed limit: the principal eigenvalue ``lambda*`` of the frozen generator
  ``D (K - I) + Df(0)`` (shifted power iteration, polished by inverse iteration);
* periodic limit: the growth bound ``omega = ln r(Phi(T, 0)) / T`` of the
  monodromy operator, and ``lambda*_T = -omega``;
* unbounded growth: the stability modulus ``s(A)`` of ``A = -k I + Df(0)``.

Generators are laid out species-major: entry ``i * n + p`` is species ``i`` at
node ``p``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from . import discretization
from .discretization import Grid
from .models import ReactionSystem

POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000
CRITICAL_BAND = 1e-3


class ConvergenceError(RuntimeError):
    pass


class DegenerateOperatorError(RuntimeError):
    pass


@dataclass
class LinearGenerator:
    matrix: np.ndarray
    time_dependence: float | None = None   # period, or None when autonomous
    m: int = 1
    n: int = 0


@dataclass
class SpectralReport:
    value: float
    eigvec: np.ndarray | None
    method: str
    residual: float
    grid_n: int
    omega: float | None = None
    iterations: int = 0
    warning: str = ""
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "value": self.value,
            "omega": self.omega,
            "residual": self.residual,
            "grid_n": self.grid_n,
            "method": self.method,
            "iterations": self.iterations,
        }
        if self.warning:
            out["warning"] = self.warning
        out.update(self.extra)
        return out


def classify(bound: float, band: float = CRITICAL_BAND) -> str:
    """Sign of a growth bound: ``persistence``, ``extinction`` or ``critical``."""
    if abs(bound) < band:
        return "critical"
    return "persistence" if bound > 0 else "extinction"


def is_metzler(M: np.ndarray, tol: float = 1e-12) -> bool:
    off = M - np.diag(np.diag(M))
    return bool(np.min(off) >= -tol) if M.shape[0] > 1 else True


def is_irreducible(M: np.ndarray) -> bool:
    if M.shape[0] == 1:
        return True
    off = M - np.diag(np.diag(M))
    ncomp, _ = connected_components(off > 0, directed=True, connection="strong")
    return ncomp == 1


def power_iteration(apply: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                    tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER):
    """Dominant eigenpair of a nonnegative operator.

    Stops when the Rayleigh quotient changes by less than ``tol`` (relative).
    Returns ``(value, x, y, iterations)`` with ``y = apply(x)`` for the final
    normalized iterate ``x``.
    """
    x = np.asarray(x0, dtype=float)
    x = x / np.max(np.abs(x))
    lam_old = None
    for it in range(1, max_iter + 1):
        y = apply(x)
        lam = float(np.vdot(x, y) / np.vdot(x, x))
        if not math.isfinite(lam):
            raise ConvergenceError("power iteration produced a non-finite estimate")
        if lam_old is not None and abs(lam - lam_old) <= tol * max(abs(lam), 1e-300):
            return lam, x, y, it
        lam_old = lam
        ymax = np.max(np.abs(y))
        if ymax == 0:
            raise DegenerateOperatorError("operator annihilated the iterate")
        x = y / ymax
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def _positive(v: np.ndarray) -> np.ndarray:
    v = np.real(v)
    if np.sum(v) < 0:
        v = -v
    return v / np.max(np.abs(v))


def _residual(M, lam, x):
    return float(np.max(np.abs(M @ x - lam * x)) / np.max(np.abs(x)))


def _refine(M: np.ndarray, lam: float, x: np.ndarray, sweeps: int = 6):
    """Inverse iteration with the shift parked just above ``lam``."""
    N = M.shape[0]
    scale = 1.0 + abs(lam)
    shift = lam + 1e-9 * scale
    lu = scipy.linalg.lu_factor(M - shift * np.eye(N), check_finite=False)
    best = (_residual(M, lam, x), lam, x)
    for _ in range(sweeps):
        y = scipy.linalg.lu_solve(lu, x, check_finite=False)
        x = _positive(y)
        Mx = M @ x
        lam = float(np.vdot(x, Mx) / np.vdot(x, x))
        res = float(np.max(np.abs(Mx - lam * x)))
        if res < best[0]:
            best = (res, lam, x)
        if res <= 1e-14 * scale:
            break
    return best[1], best[2], best[0]


def _principal(M: np.ndarray, method: str, grid_n: int) -> SpectralReport:
    N = M.shape[0]
    if not is_metzler(M):
        vals = np.linalg.eigvals(M)
        return SpectralReport(float(np.max(vals.real)), None, "dense-eig (not Metzler)",
                              float("nan"), grid_n)
    s = 1.0 + float(np.max(np.abs(np.diag(M))))
    shifted = M + s * np.eye(N)
    lam, x, _, iters = power_iteration(lambda v: shifted @ v, np.ones(N))
    lam -= s
    lam, x, res = _refine(M, lam, x)
    warn = ""
    if not is_irreducible(M):
        warn = "generator is reducible; the dominant eigenvalue may not be simple"
        warnings.warn(warn, RuntimeWarning, stacklevel=3)
    return SpectralReport(lam, x, method, res, grid_n, iterations=iters, warning=warn)


# ---------------------------------------------------------------------------
# generators

def linearization(system: ReactionSystem) -> np.ndarray:
    return system.df0()


def build_generator(system: ReactionSystem, kernel, grid: Grid, rho: float, diffusion,
                    dilution: float = 0.0, df0: np.ndarray | None = None) -> LinearGenerator:
    """Dense ``D (K(rho) - I) + Df(0) - dilution * I`` on ``m * n`` unknowns."""
    K = discretization.operator_entries(kernel, rho, grid)
    return LinearGenerator(_block(K, diffusion, linearization(system) if df0 is None else df0,
                                  dilution), None, system.m, grid.n_nodes)


def _block(K, diffusion, df0, dilution):
    n = K.shape[0]
    m = df0.shape[0]
    d = np.asarray(diffusion, dtype=float)
    eye = np.eye(n)
    G = np.kron(df0, eye)
    for i in range(m):
        G[i * n:(i + 1) * n, i * n:(i + 1) * n] += d[i] * (K - eye)
    G -= dilution * np.eye(m * n)
    return G


class GeneratorFamily:
    """``t -> D (K(rho(t)) - I) + Df(0) - (rho_dot/rho)(t) I``.

    Calling the family returns the dense matrix; :meth:`apply` multiplies a
    block of vectors without forming it.
    """

    def __init__(self, system: ReactionSystem, kernel, grid: Grid, diffusion,
                 rho: Callable, rho_dot: Callable, period: float | None = None):
        self.m = system.m
        self.n = grid.n_nodes
        self.df0 = linearization(system)
        self.kernel = kernel
        self.grid = grid
        self.diffusion = np.asarray(diffusion, dtype=float)
        self.rho = rho
        self.rho_dot = rho_dot
        self.period = period
        self._cache: dict[float, np.ndarray] = {}  # keyed by rho

    def _stage(self, t: float):
        r = float(self.rho(np.float64(t)))
        K = self._cache.get(r)
        if K is None:
            K = discretization.operator_entries(self.kernel, r, self.grid)
            if len(self._cache) >= 4:
                self._cache.pop(next(iter(self._cache)))
            self._cache[r] = K
        return K, float(self.rho_dot(np.float64(t))) / r

    def __call__(self, t: float) -> np.ndarray:
        K, dil = self._stage(t)
        return _block(K, self.diffusion, self.df0, dil)

    def apply(self, t: float, X: np.ndarray) -> np.ndarray:
        K, dil = self._stage(t)
        p = X.shape[1]
        X3 = X.reshape(self.m, self.n, p)
        out = np.matmul(K, X3)
        out -= X3
        out *= self.diffusion[:, None, None]
        out += (self.df0 @ X.reshape(self.m, -1)).reshape(X3.shape)
        out -= dil * X3
        return out.reshape(self.m * self.n, p)


def periodic_family(system, kernel, grid, diffusion, profile, period: float) -> GeneratorFamily:
    """Family driven by a periodic growth profile (``profile.rho``, ``profile.rho_dot``)."""
    return GeneratorFamily(system, kernel, grid, diffusion, profile.rho, profile.rho_dot, period)


def constant_family(gen: LinearGenerator, period: float):
    """Wrap a frozen generator as a trivially periodic family."""
    M = gen.matrix

    def builder(_t):
        return M

    builder.apply = lambda _t, X: M @ X
    builder.period = period
    return builder


# ---------------------------------------------------------------------------
# spectral bounds

def spectral_bound_autonomous(gen: LinearGenerator) -> SpectralReport:
    """Principal eigenvalue of a time-independent generator."""
    if gen.time_dependence is not None:
        raise ValueError("generator is time dependent; use periodic_bound")
    return _principal(np.asarray(gen.matrix, dtype=float), "shifted-power+inverse-iteration",
                      gen.n)


def propagate(gen_builder, T: float, dt: float, X, t0: float = 0.0) -> np.ndarray:
    """Solve ``X' = G(t) X`` on ``[t0, t0 + T]`` by RK4, ``G`` evaluated at stage times."""
    steps = int(round(T / dt))
    if not T > 0 or not dt > 0 or abs(steps * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} must divide T={T}")
    apply = getattr(gen_builder, "apply", None)
    if apply is None:
        def apply(t, Y):
            return gen_builder(t) @ Y
    X = np.array(X, dtype=float, copy=True)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    h = dt
    for k in range(steps):
        t = t0 + k * h
        k1 = apply(t, X)
        k2 = apply(t + 0.5 * h, X + (0.5 * h) * k1)
        k3 = apply(t + 0.5 * h, X + (0.5 * h) * k2)
        k4 = apply(t + h, X + h * k3)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(X)):
            raise FloatingPointError(f"monodromy integration blew up at t={t + h:.6g}")
    return X[:, 0] if vec else X


def monodromy(gen_builder, T: float, dt: float, size: int | None = None) -> np.ndarray:
    """``Phi(T, 0)``: the period map, integrated column-by-column from the identity."""
    if size is None:
        if hasattr(gen_builder, "m") and hasattr(gen_builder, "n"):
            size = gen_builder.m * gen_builder.n
        else:
            size = np.asarray(gen_builder(0.0)).shape[0]
    return propagate(gen_builder, T, dt, np.eye(size))


def periodic_bound(gen_builder, T: float, dt: float, x0=None, tol: float = POWER_TOL,
                   size: int | None = None, grid_n: int = 0) -> SpectralReport:
    """``lambda*_T = -ln r(Phi(T, 0)) / T``.

    The spectral radius comes from power iteration on ``Phi(T, 0)``; each
    application of ``Phi`` integrates one period, so the dense matrix is never
    formed.
    """
    if size is None:
        if x0 is not None:
            size = len(x0)
        elif hasattr(gen_builder, "m") and hasattr(gen_builder, "n"):
            size = gen_builder.m * gen_builder.n
        else:
            size = np.asarray(gen_builder(0.0)).shape[0]
    start = np.ones(size) if x0 is None else np.asarray(x0, dtype=float)
    r, x, y, iters = power_iteration(lambda v: propagate(gen_builder, T, dt, v), start, tol=tol)
    if not r > 0:
        raise DegenerateOperatorError(f"spectral radius estimate {r} is not positive")
    omega = math.log(r) / T
    residual = float(np.max(np.abs(y - r * x)) / (r * np.max(np.abs(x))))
    if grid_n == 0 and hasattr(gen_builder, "n"):
        grid_n = gen_builder.n
    return SpectralReport(-omega, _positive(x), "power-iteration-on-monodromy(rk4)", residual,
                          grid_n, omega=omega, iterations=iters,
                          extra={"spectral_radius": r, "period": T, "dt": dt})


def limit_matrix(system: ReactionSystem, k: float) -> np.ndarray:
    """``A = -k I + Df(0)`` of the spatially homogeneous limit."""
    return -k * np.eye(system.m) + linearization(system)


def ode_bound(A) -> SpectralReport:
    """``s(A)`` with its Perron vector (normalized to unit Euclidean length)."""
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if not is_metzler(A):
        raise ValueError("A must be Metzler (nonnegative off-diagonal)")
    s = 1.0 + float(np.max(np.abs(np.diag(A))))
    B = A + s * np.eye(m)
    lam, x, _, iters = power_iteration(B.dot, np.ones(m))
    lam -= s
    warn = ""
    if is_irreducible(A):
        lam, x, res = _refine(A, lam, x, sweeps=3)
    else:
        res = _residual(A, lam, x)
        warn = "A is reducible; eigenvector may be only nonnegative"
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
    x = x / np.linalg.norm(x)
    return SpectralReport(lam, x, "shifted-power", res, 0, iterations=iters, warning=warn)
