"""Domain growth profiles ``rho(t)`` with ``rho(0) = 1``.

The habitat at time ``t`` is ``rho(t) * Omega_0``. Each profile carries a
hand-coded derivative and a declared long-time behaviour, which decides the
threshold quantity that applies: a fixed limit, a periodic limit, or
unbounded growth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AsymptoticallyFixed:
    rho_inf: float


@dataclass(frozen=True)
class AsymptoticallyPeriodic:
    period: float
    rho_T: Fn
    rho_T_dot: Fn


@dataclass(frozen=True)
class AsymptoticallyUnbounded:
    k: float


Kind = Union[AsymptoticallyFixed, AsymptoticallyPeriodic, AsymptoticallyUnbounded]


@dataclass(frozen=True)
class GrowthProfile:
    rho: Fn
    rho_dot: Fn
    kind: Kind
    label: str
    params: dict = field(default_factory=dict)
    # closed-form rho_dot/rho, for profiles whose rho overflows at long horizons
    rate: Fn | None = None

    def __call__(self, t):
        return self.rho(np.asarray(t, dtype=float))

    def derivative(self, t):
        return self.rho_dot(np.asarray(t, dtype=float))


def relative_rate(profile: GrowthProfile, t):
    """Dilution coefficient ``rho_dot / rho`` (space dimension one)."""
    t = np.asarray(t, dtype=float)
    if profile.rate is not None:
        return profile.rate(t)
    return profile.rho_dot(t) / profile.rho(t)


# ---------------------------------------------------------------------------
# built-in profiles

def fixed(rho0: float = 1.0) -> GrowthProfile:
    """Constant ``rho``; ``rho0 != 1`` is only meaningful for frozen-limit problems."""
    return GrowthProfile(
        rho=lambda t: np.full_like(t, rho0, dtype=float),
        rho_dot=lambda t: np.zeros_like(t, dtype=float),
        kind=AsymptoticallyFixed(rho0),
        label="fixed",
        params={"rho0": rho0},
    )


def case1() -> GrowthProfile:
    # (3/2)e^{2t} / (1 + e^{2t}/2) rewritten to avoid overflow at large t
    def rho(t):
        e = np.exp(-2.0 * t)
        return 3.0 / (1.0 + 2.0 * e)

    def rho_dot(t):
        e = np.exp(-2.0 * t)
        return 12.0 * e / (1.0 + 2.0 * e) ** 2

    return GrowthProfile(rho, rho_dot, AsymptoticallyFixed(3.0), "case1")


def _sine_periodic(offset: float, amp: float = 0.2, period: float = 20.0):
    w = 2.0 * math.pi / period

    def rho_T(t):
        return amp * np.sin(w * t) + offset

    def rho_T_dot(t):
        return amp * w * np.cos(w * t)

    return rho_T, rho_T_dot


def periodic(offset: float = 1.0, amp: float = 0.2, period: float = 20.0) -> GrowthProfile:
    """Purely periodic ``amp*sin(2*pi*t/period) + offset``."""
    rT, rTd = _sine_periodic(offset, amp, period)
    return GrowthProfile(rT, rTd, AsymptoticallyPeriodic(period, rT, rTd), "periodic",
                         params={"offset": offset, "amp": amp, "period": period})


def case2() -> GrowthProfile:
    """``(1 - e^{-t}) (0.2 sin(0.1 pi t) + 1) + 1``.

    As written this tends to ``0.2 sin(0.1 pi t) + 2``, so that is the
    declared periodic limit. The eigenproblem quoted alongside the example
    uses ``0.2 sin(0.1 pi t) + 1``; see :func:`case2_eigen_periodic`.
    """
    base, base_dot = _sine_periodic(1.0)

    def rho(t):
        return (1.0 - np.exp(-t)) * base(t) + 1.0

    def rho_dot(t):
        e = np.exp(-t)
        return e * base(t) + (1.0 - e) * base_dot(t)

    lim, lim_dot = _sine_periodic(2.0)
    return GrowthProfile(rho, rho_dot, AsymptoticallyPeriodic(20.0, lim, lim_dot), "case2")


def case2_eigen_periodic() -> GrowthProfile:
    """The periodic coefficient ``0.2 sin(0.1 pi t) + 1`` of the Case-2 eigenproblem."""
    p = periodic(1.0, 0.2, 20.0)
    return GrowthProfile(p.rho, p.rho_dot, p.kind, "case2_eigen")


def linear(slope: float = 0.5) -> GrowthProfile:
    return GrowthProfile(
        rho=lambda t: slope * t + 1.0,
        rho_dot=lambda t: np.full_like(t, slope, dtype=float),
        kind=AsymptoticallyUnbounded(0.0),
        label="linear",
        params={"slope": slope},
    )


def case3() -> GrowthProfile:
    p = linear(0.5)
    return GrowthProfile(p.rho, p.rho_dot, p.kind, "case3", p.params)


def exponential(k: float) -> GrowthProfile:
    return GrowthProfile(
        rho=lambda t: np.exp(k * t),
        rho_dot=lambda t: k * np.exp(k * t),
        kind=AsymptoticallyUnbounded(k),
        label="exponential",
        params={"k": k},
        rate=lambda t: np.full_like(t, k, dtype=float),
    )


def logistic(rho_inf: float, kappa: float) -> GrowthProfile:
    """``rho_inf e^{kt} / (rho_inf - 1 + e^{kt})``, written in decaying exponentials."""
    a = rho_inf - 1.0

    def rho(t):
        e = np.exp(-kappa * t)
        return rho_inf / (a * e + 1.0)

    def rho_dot(t):
        e = np.exp(-kappa * t)
        return rho_inf * a * kappa * e / (a * e + 1.0) ** 2

    return GrowthProfile(rho, rho_dot, AsymptoticallyFixed(rho_inf), "logistic",
                         params={"rho_inf": rho_inf, "kappa": kappa})


def oscillating(amp: float = 0.2, rate: float = 1.0) -> GrowthProfile:
    """``1 + amp sin(t) e^{-rate t}``: expands then shrinks back toward 1."""
    return GrowthProfile(
        rho=lambda t: 1.0 + amp * np.sin(t) * np.exp(-rate * t),
        rho_dot=lambda t: amp * np.exp(-rate * t) * (np.cos(t) - rate * np.sin(t)),
        kind=AsymptoticallyFixed(1.0),
        label="oscillating",
        params={"amp": amp, "rate": rate},
    )


BUILTIN = {
    "fixed": fixed,
    "case1": case1,
    "case2": case2,
    "case2_eigen": case2_eigen_periodic,
    "case3": case3,
    "periodic": periodic,
    "linear": linear,
    "exponential": exponential,
    "logistic": logistic,
    "oscillating": oscillating,
}


def by_label(label: str, params: dict | None = None) -> GrowthProfile:
    try:
        factory = BUILTIN[label]
    except KeyError:
        raise KeyError(f"unknown growth profile {label!r}; expected one of {sorted(BUILTIN)}") from None
    return factory(**(params or {}))


# ---------------------------------------------------------------------------
# validation

@dataclass
class ClassifyReport:
    label: str
    declared: str
    passed: bool
    residuals: dict[str, float]
    message: str = ""


def classify_validate(profile: GrowthProfile, horizon: float | None = None,
                      tol: float = 1e-4, probes: int = 401) -> ClassifyReport:
    """Probe ``rho`` on ``[horizon/2, horizon]`` and test the declared limit.

    Default horizons: 50 for fixed/periodic limits, 1e4 for unbounded growth.
    For unbounded growth the rate residual is taken at the end of the window
    and must shrink monotonically across it. A mismatch is reported, never
    raised.
    """
    kind = profile.kind
    if horizon is None:
        horizon = 1e4 if isinstance(kind, AsymptoticallyUnbounded) else 50.0
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    t = np.linspace(horizon / 2.0, horizon, probes)
    unbounded = isinstance(kind, AsymptoticallyUnbounded)
    with np.errstate(over="ignore", invalid="ignore"):
        r = profile.rho(t)
        rd = profile.rho_dot(t)
    res: dict[str, float] = {"rho_min": float(np.min(r))}
    finite = np.isfinite(r) | (unbounded & (r == np.inf))
    if not np.all(finite) or np.any(r <= 0):
        return ClassifyReport(profile.label, type(kind).__name__, False, res,
                              "rho is not finite and positive on the probe window")

    if isinstance(kind, AsymptoticallyFixed):
        res["rho"] = float(np.max(np.abs(r - kind.rho_inf)))
        res["rho_dot"] = float(np.max(np.abs(rd)))
        ok = res["rho"] <= tol and res["rho_dot"] <= tol
    elif isinstance(kind, AsymptoticallyPeriodic):
        res["rho"] = float(np.max(np.abs(r - kind.rho_T(t))))
        res["rho_dot"] = float(np.max(np.abs(rd - kind.rho_T_dot(t))))
        # the limit itself must repeat with the declared period
        res["period"] = float(np.max(np.abs(kind.rho_T(t + kind.period) - kind.rho_T(t))))
        ok = max(res["rho"], res["rho_dot"], res["period"]) <= tol
    else:
        # rates like 1/t approach k slowly: judge the end of the window and
        # require the approach to be monotone across it
        with np.errstate(over="ignore", invalid="ignore"):
            gap = np.abs(relative_rate(profile, t) - kind.k)
        res["rate"] = float(gap[-1])
        res["rate_window_max"] = float(np.max(gap))
        monotone = bool(np.all(np.diff(gap) <= 1e-12 * max(1.0, float(gap[0]))))
        with np.errstate(divide="ignore", over="ignore"):
            ratio = float(r[-1] / r[0]) if np.isfinite(r[0]) else math.inf
        res["growth_ratio"] = ratio
        # crude unboundedness probe: still growing appreciably over the window
        ok = res["rate"] <= tol and monotone and ratio > 1.0 + 100.0 * tol
    msg = "" if ok else f"declared {type(kind).__name__} inconsistent with probe: {res}"
    return ClassifyReport(profile.label, type(kind).__name__, bool(ok), res, msg)


def fd_derivative_error(profile: GrowthProfile, times, h: float = 1e-4) -> float:
    """Max relative gap between ``rho_dot`` and a central difference of ``rho``."""
    t = np.asarray(times, dtype=float)
    fd = (profile.rho(t + h) - profile.rho(t - h)) / (2.0 * h)
    an = profile.rho_dot(t)
    scale = np.maximum(np.abs(an), 1e-3 * np.abs(profile.rho(t)))
    return float(np.max(np.abs(fd - an) / scale))
