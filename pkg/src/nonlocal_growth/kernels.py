"""Convolution kernels for nonlocal dispersal and their rescaling.

A kernel is a probability density on the real line. Moving the problem from
the growing domain onto the fixed unit interval replaces ``J`` by
``rho * J(rho * y)``, which keeps unit mass but shrinks the support by
``1/rho``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

# Case-4 Gaussian tail is cut here; the neglected mass is below 1e-14.
GAUSS_TAIL_CUTOFF = 8.0
QUAD_EPSABS = 1e-10


class QuadratureError(RuntimeError):
    """Adaptive quadrature of a kernel moment did not converge."""


@dataclass(frozen=True)
class Kernel:
    """A one-dimensional dispersal density.

    ``support`` is the closed interval outside of which the density vanishes
    (either end may be infinite). ``breakpoints`` lists offsets where the
    density is not smooth; quadrature splits there.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    label: str
    breakpoints: tuple[float, ...] = ()
    # finite window used for quadrature when the support is unbounded
    quad_window: tuple[float, float] | None = None

    @property
    def support_radius(self) -> float:
        return max(abs(self.support[0]), abs(self.support[1]))

    @property
    def window(self) -> tuple[float, float]:
        if self.quad_window is not None:
            return self.quad_window
        return self.support

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.evaluator(x)


@dataclass(frozen=True)
class RescaledKernel:
    """``y -> rho * base(rho * y)``; behaves like a :class:`Kernel`."""

    base: Kernel | RescaledKernel
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return self.rho * self.base(self.rho * y)

    @property
    def evaluator(self):
        return self.__call__

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.base.support
        return lo / self.rho, hi / self.rho

    @property
    def support_radius(self) -> float:
        return self.base.support_radius / self.rho

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(b / self.rho for b in self.base.breakpoints)

    @property
    def window(self) -> tuple[float, float]:
        lo, hi = self.base.window
        return lo / self.rho, hi / self.rho

    @property
    def label(self) -> str:
        return f"{self.base.label}@rho={self.rho:g}"


def eval(kernel, x):  # noqa: A001 - mirrors the operation name
    """Density of ``kernel`` at offset ``x`` (0 outside the support)."""
    return kernel(x)


def rescale(kernel, rho: float) -> RescaledKernel:
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return RescaledKernel(kernel, float(rho))


# ---------------------------------------------------------------------------
# built-in kernels

def _tent(x):
    return np.maximum(1.0 - np.abs(x), 0.0)


def tent() -> Kernel:
    """``J(x) = 1 - |x|`` on ``[-1, 1]``."""
    return Kernel(_tent, (-1.0, 1.0), "tent", breakpoints=(-1.0, 0.0, 1.0))


CASE4_C = 1.0 / (0.25 + math.sqrt(math.pi / 2.0))


def _case4(x):
    left = CASE4_C * np.exp(-0.5 * np.minimum(x, 0.0) ** 2)
    right = CASE4_C * (1.0 - 2.0 * x)
    return np.where(x <= 0.0, left, np.where(x < 0.5, right, 0.0))


def case4_asymmetric() -> Kernel:
    """Gaussian to the left of 0, a linear ramp to 0 on ``(0, 1/2)``."""
    return Kernel(
        _case4,
        (-math.inf, 0.5),
        "case4_asymmetric",
        breakpoints=(0.0, 0.5),
        quad_window=(-GAUSS_TAIL_CUTOFF, 0.5),
    )


def _bump_profile(x):
    out = np.zeros_like(x, dtype=float)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
    return out


_BUMP_MASS = integrate.quad(lambda s: float(_bump_profile(np.array([s]))[0]), -1.0, 1.0,
                            epsabs=1e-14, epsrel=1e-14, limit=200)[0]
BUMP_C = 1.0 / _BUMP_MASS


def _bump(x):
    x = np.atleast_1d(x)
    return BUMP_C * _bump_profile(x)


def smooth_bump(width: float = 1.0) -> Kernel:
    """Normalized mollifier ``C exp(-1/(1-x^2))``, optionally widened."""
    k = Kernel(lambda x: _bump(x).reshape(np.shape(x)), (-1.0, 1.0), "smooth_bump",
               breakpoints=(-1.0, 1.0))
    if width != 1.0:
        return RescaledKernel(k, 1.0 / width)
    return k


def shift(kernel, offset: float) -> Kernel:
    """Translate a kernel so its mass sits around ``offset``."""
    lo, hi = kernel.support
    wlo, whi = kernel.window
    return Kernel(
        lambda x: kernel(np.asarray(x, dtype=float) - offset),
        (lo + offset, hi + offset),
        f"{kernel.label}+{offset:g}",
        breakpoints=tuple(b + offset for b in kernel.breakpoints),
        quad_window=(wlo + offset, whi + offset),
    )


def piecewise_linear(offsets, densities, label: str = "custom") -> Kernel:
    """Kernel interpolating ``(offset, density)`` pairs, normalized to unit mass."""
    xs = np.asarray(offsets, dtype=float)
    ys = np.asarray(densities, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValueError("need at least two (offset, density) pairs")
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    if np.any(np.diff(xs) <= 0):
        raise ValueError("offsets must be distinct")
    if np.any(ys < 0):
        raise ValueError("densities must be nonnegative")
    mass = float(integrate.trapezoid(ys, xs))
    if mass <= 0:
        raise ValueError("kernel has zero mass")
    ys = ys / mass
    lo, hi = float(xs[0]), float(xs[-1])

    def evaluator(x):
        return np.interp(x, xs, ys, left=0.0, right=0.0)

    return Kernel(evaluator, (lo, hi), label, breakpoints=tuple(float(v) for v in xs))


def load_csv(path: str | Path) -> Kernel:
    """Read a two-column ``offset,density`` CSV (header optional)."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header line
    if not rows:
        raise ValueError(f"{path}: no kernel samples")
    xs, ys = zip(*rows)
    return piecewise_linear(xs, ys, label=path.stem)


BUILTIN = {
    "tent": tent,
    "case4_asymmetric": case4_asymmetric,
    "smooth_bump": smooth_bump,
}


def by_label(label: str) -> Kernel:
    """Resolve a built-in kernel name or a path to a CSV kernel."""
    if label in BUILTIN:
        return BUILTIN[label]()
    if label.endswith(".csv"):
        return load_csv(label)
    raise KeyError(f"unknown kernel {label!r}; expected one of {sorted(BUILTIN)} or a .csv path")


# ---------------------------------------------------------------------------
# moments

def _integrate(fn, kernel) -> float:
    lo, hi = kernel.window
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise QuadratureError(f"{kernel.label}: unbounded support without a quadrature window")
    pts = sorted({p for p in kernel.breakpoints if lo < p < hi})
    edges = [lo, *pts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err, info = _quad(fn, a, b)
        if err > 10 * QUAD_EPSABS:
            raise QuadratureError(f"{kernel.label}: quadrature error {err:.2e} on [{a}, {b}]")
        total += val
    return total


def _quad(fn, a, b):
    out = integrate.quad(lambda s: float(fn(s)), a, b, epsabs=QUAD_EPSABS * 1e-2,
                         epsrel=1e-13, limit=400, full_output=1)
    return out[0], out[1], out[2]


def mass(kernel) -> float:
    return _integrate(lambda s: kernel(np.array([s]))[0], kernel)


def center_of_mass(kernel) -> float:
    """First moment ``int x J(x) dx``."""
    return _integrate(lambda s: s * kernel(np.array([s]))[0], kernel)


def second_moment(kernel) -> float:
    return _integrate(lambda s: s * s * kernel(np.array([s]))[0], kernel)


def normalization_residual(kernel, rho: float) -> float:
    """``|int rescale(kernel, rho) - 1|``."""
    return abs(mass(rescale(kernel, rho)) - 1.0)


@dataclass
class KernelReport:
    label: str
    nonnegative: bool
    positive_at_origin: bool
    mass_residual: float
    compact_support: bool
    center_of_mass: float
    # (J1) only matters on unbounded-growth scenarios; elsewhere it is informational
    j1_required: bool
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok = self.nonnegative and self.positive_at_origin and self.mass_residual <= 1e-8
        if self.j1_required:
            ok = ok and self.compact_support and abs(self.center_of_mass) <= 1e-6
        return ok

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def validate(kernel, j1_required: bool = False, samples: int = 4001) -> KernelReport:
    """Check the standing kernel assumptions numerically."""
    lo, hi = kernel.window
    xs = np.linspace(lo - 0.5, hi + 0.5, samples)
    vals = kernel(xs)
    notes = []
    compact = math.isfinite(kernel.support[0]) and math.isfinite(kernel.support[1])
    com = center_of_mass(kernel)
    if not compact:
        notes.append("support is unbounded")
    if abs(com) > 1e-6:
        notes.append(f"center of mass {com:.6g} is not at the origin")
    return KernelReport(
        label=kernel.label,
        nonnegative=bool(np.all(vals >= 0.0)),
        positive_at_origin=bool(kernel(np.array([0.0]))[0] > 0.0),
        mass_residual=abs(mass(kernel) - 1.0),
        compact_support=compact,
        center_of_mass=com,
        j1_required=j1_required,
        notes=notes,
    )
