"""Reaction terms ``f`` with Jacobians, caps, and numeric checks of their structure.

States are arrays whose first axis is the species index; any trailing shape
(grid nodes, batches) is carried through elementwise.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.stats import qmc


@dataclass(frozen=True)
class ReactionSystem:
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    cap_v: np.ndarray
    params: dict
    label: str
    species: tuple[str, ...] = ()

    def __post_init__(self):
        cap = np.asarray(self.cap_v, dtype=float)
        if cap.shape != (self.m,) or np.any(cap <= 0):
            raise ValueError(f"cap vector must be {self.m} positive numbers, got {self.cap_v}")
        object.__setattr__(self, "cap_v", cap)
        if not self.species:
            object.__setattr__(self, "species", tuple(f"u{i + 1}" for i in range(self.m)))

    def df0(self) -> np.ndarray:
        return np.asarray(self.jacobian(np.zeros(self.m)), dtype=float)


@dataclass(frozen=True)
class WNParams:
    """West Nile vector-host parameters (rates per day)."""

    d_V: float = 0.029
    alpha_V: float = 0.24
    alpha_R: float = 1.0
    beta_R: float = 0.16
    gamma_R: float = 0.01
    N_R: float = 100.0
    A_V: float = 5000.0
    D_V: float = 0.03
    D_R: float = 2.0

    def __post_init__(self):
        bad = [k for k, v in asdict(self).items() if not v > 0]
        if bad:
            raise ValueError(f"WN parameters must be positive: {bad}")

    @property
    def diffusion(self) -> np.ndarray:
        return np.array([self.D_V, self.D_R])


def wn_reaction(params: WNParams | None = None) -> ReactionSystem:
    """Infected mosquitoes ``I_V`` and infected birds ``I_R``."""
    p = params or WNParams()
    a_v = p.alpha_V * p.beta_R / p.N_R
    a_r = p.alpha_R * p.beta_R / p.N_R

    def f(u):
        iv, ir = u[0], u[1]
        return np.stack([
            a_v * ir * (p.A_V - iv) - p.d_V * iv,
            a_r * iv * (p.N_R - ir) - p.gamma_R * ir,
        ])

    def jac(u):
        iv, ir = u[0], u[1]
        return np.array([
            [-a_v * ir - p.d_V, a_v * (p.A_V - iv)],
            [a_r * (p.N_R - ir), -a_r * iv - p.gamma_R],
        ])

    return ReactionSystem(2, f, jac, np.array([p.A_V, p.N_R]), asdict(p), "west_nile",
                          species=("I_V", "I_R"))


def logistic_reaction(r: float = 1.0, K: float = 1.0, cap: float | None = None) -> ReactionSystem:
    """Scalar ``r u (1 - u/K)``; the cap defaults to ``K``."""
    def f(u):
        return r * u * (1.0 - u / K)

    def jac(u):
        return np.array([[r * (1.0 - 2.0 * u[0] / K)]])

    return ReactionSystem(1, f, jac, np.array([cap if cap is not None else K]),
                          {"r": r, "K": K}, "logistic", species=("u",))


def linear_reaction(A, cap) -> ReactionSystem:
    A = np.asarray(A, dtype=float)
    m = A.shape[0]

    def f(u):
        return np.tensordot(A, u, axes=1)

    return ReactionSystem(m, f, lambda u: A.copy(), np.asarray(cap, dtype=float),
                          {"A": A.tolist()}, "linear")


BUILTIN = {"west_nile": wn_reaction, "logistic": logistic_reaction}


def by_label(label: str, params: dict | None = None) -> ReactionSystem:
    if label == "west_nile":
        return wn_reaction(WNParams(**(params or {})))
    if label == "logistic":
        return logistic_reaction(**(params or {}))
    raise KeyError(f"unknown model {label!r}; expected one of {sorted(BUILTIN)}")


# ---------------------------------------------------------------------------
# checks

@dataclass
class ConditionResult:
    passed: bool
    worst_margin: float
    witness: dict | None = None
    note: str = ""


@dataclass
class FReport:
    label: str
    samples: int
    seed: int
    conditions: dict[str, ConditionResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "samples": self.samples,
            "seed": self.seed,
            "passed": self.passed,
            "conditions": {k: asdict(v) for k, v in self.conditions.items()},
        }


def _is_irreducible(pattern: np.ndarray) -> bool:
    m = pattern.shape[0]
    if m == 1:
        return True
    ncomp, _ = connected_components(pattern.astype(int), directed=True, connection="strong")
    return ncomp == 1


def validate_F(system: ReactionSystem, samples: int = 1000, seed: int = 0,
               tol: float = 1e-12) -> FReport:
    """Sample the order interval ``(0, cap]`` and check the structural conditions.

    Reports cooperativity, irreducibility, sub-homogeneity (non-strict, with the
    smallest observed margin), ``f(0) = 0``, and the sign of ``f_i`` on the face
    ``u_i = v_i``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    m, cap = system.m, system.cap_v
    pts = qmc.Halton(d=m + 1, scramble=True, seed=seed).random(samples)
    # keep strictly inside (0, cap]
    u = (1e-6 + (1.0 - 1e-6) * pts[:, :m]) * cap
    alpha = 1e-3 + (1.0 - 2e-3) * pts[:, m]
    rep = FReport(system.label, samples, seed)

    f0 = np.asarray(system.f(np.zeros(m)), dtype=float)
    rep.conditions["f_zero"] = ConditionResult(bool(np.max(np.abs(f0)) <= 1e-14),
                                               -float(np.max(np.abs(f0))))

    worst, wit, irreducible = np.inf, None, True
    for k in range(samples):
        J = np.asarray(system.jacobian(u[k]), dtype=float)
        off = J - np.diag(np.diag(J))
        mask = ~np.eye(m, dtype=bool)
        if m > 1:
            lo = float(np.min(off[mask]))
            if lo < worst:
                worst, wit = lo, {"u": u[k].tolist(), "jacobian": J.tolist()}
        if not _is_irreducible(off > 0):
            irreducible = False
    if m == 1:
        worst = 0.0
    rep.conditions["cooperative"] = ConditionResult(worst >= -tol, float(worst), wit)
    rep.conditions["irreducible"] = ConditionResult(
        irreducible, 0.0, None, "" if irreducible else "off-diagonal sign pattern is reducible somewhere")

    fu = np.asarray(system.f(u.T), dtype=float)                 # (m, samples)
    fau = np.asarray(system.f(alpha * u.T), dtype=float)
    gap = fau - alpha * fu
    scale = tol * np.maximum(1.0, np.abs(fu) + np.abs(fau))
    margin = gap + scale
    idx = np.unravel_index(np.argmin(gap), gap.shape)
    min_gap = float(gap[idx])
    rep.conditions["subhomogeneous"] = ConditionResult(
        bool(np.all(margin >= 0)),
        min_gap,
        {"u": u[idx[1]].tolist(), "alpha": float(alpha[idx[1]]), "species": int(idx[0])},
        "strict" if min_gap > 0 else "non-strict (equality within tolerance)",
    )

    cap_worst, cap_wit = -np.inf, None
    for i in range(m):
        face = u.T.copy()
        face[i] = cap[i]
        fi = np.asarray(system.f(face), dtype=float)[i]
        j = int(np.argmax(fi))
        if fi[j] > cap_worst:
            cap_worst, cap_wit = float(fi[j]), {"u": face[:, j].tolist(), "species": i}
    rep.conditions["cap"] = ConditionResult(cap_worst <= 0.0, -cap_worst, cap_wit,
                                            "margin is min over faces of -f_i(u) with u_i = v_i")
    return rep


def jacobian_fd_check(system: ReactionSystem, point, h: float = 1e-5) -> float:
    """Max entrywise gap between the analytic Jacobian and central differences,
    relative to the largest analytic entry (floored at 1)."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(point, dtype=float)
    m = system.m
    J = np.asarray(system.jacobian(x), dtype=float)
    fd = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        fd[:, j] = (np.asarray(system.f(x + e)) - np.asarray(system.f(x - e))) / (2.0 * h)
    return float(np.max(np.abs(J - fd)) / max(1.0, float(np.max(np.abs(J)))))


def lipschitz_bound(system: ReactionSystem, samples: int = 256, seed: int = 0) -> float:
    """Sampled max of the infinity norm of ``Df`` over the order interval."""
    pts = qmc.Halton(d=system.m, scramble=True, seed=seed).random(samples) * system.cap_v
    corners = np.array(np.meshgrid(*[[0.0, c] for c in system.cap_v])).reshape(system.m, -1).T
    best = 0.0
    for u in np.vstack([pts, corners]):
        J = np.asarray(system.jacobian(u), dtype=float)
        best = max(best, float(np.max(np.sum(np.abs(J), axis=1))))
    return best
