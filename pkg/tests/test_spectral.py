import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_growth import discretization, growth, kernels, models, spectral

WN = models.wn_reaction()
D = models.WNParams().diffusion
CASE3 = (-0.039 + math.sqrt(0.039 ** 2 + 1.22764)) / 2


def test_ode_bound_closed_form():
    rep = spectral.ode_bound([[-0.029, 1.92], [0.16, -0.01]])
    assert rep.value == pytest.approx(CASE3, abs=1e-12)
    assert abs(rep.value - 0.5348) <= 1e-4
    assert np.all(rep.eigvec > 0) and np.linalg.norm(rep.eigvec) == pytest.approx(1.0)


def test_ode_bound_examples():
    assert spectral.ode_bound(np.diag([-1.0, -2.0])).value == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        spectral.ode_bound([[0.0, -1.0], [1.0, 0.0]])
    with pytest.warns(RuntimeWarning):
        spectral.ode_bound([[1.0, 0.0], [1.0, 0.5]])


def test_limit_matrix():
    np.testing.assert_allclose(spectral.limit_matrix(WN, 0.1), WN.df0() - 0.1 * np.eye(2))


def test_classify():
    assert spectral.classify(0.3) == "persistence"
    assert spectral.classify(-0.3) == "extinction"
    assert spectral.classify(5e-4) == "critical"


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_autonomous_matches_dense_eig(seed, m):
    rng = np.random.default_rng(seed)
    M = rng.uniform(0.05, 1.0, (m, m))
    np.fill_diagonal(M, rng.uniform(-3, 1, m))
    rep = spectral.spectral_bound_autonomous(spectral.LinearGenerator(M, None, 1, m))
    assert rep.value == pytest.approx(np.max(np.linalg.eigvals(M).real), abs=1e-9)
    assert np.all(rep.eigvec > 0)
    assert rep.residual <= 1e-8


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_power_iteration_matches_eig(seed, m):
    rng = np.random.default_rng(seed)
    M = rng.uniform(0.1, 1.0, (m, m))
    lam, x, y, it = spectral.power_iteration(M.dot, np.ones(m))
    assert lam == pytest.approx(np.max(np.abs(np.linalg.eigvals(M))), rel=1e-8)


def test_power_iteration_degenerate():
    with pytest.raises(spectral.DegenerateOperatorError):
        spectral.power_iteration(lambda v: 0 * v, np.array([1.0, 0.0]))


def test_zero_diffusion_generator_is_block_diagonal_df0():
    g = discretization.build_grid(5)
    gen = spectral.build_generator(WN, kernels.tent(), g, 3.0, [0.0, 0.0])
    rep = spectral.spectral_bound_autonomous(gen)
    assert rep.value == pytest.approx(CASE3, abs=1e-10)


def test_generator_metzler_and_sign():
    g = discretization.build_grid(30)
    gen = spectral.build_generator(WN, kernels.tent(), g, 3.0, D)
    assert spectral.is_metzler(gen.matrix) and spectral.is_irreducible(gen.matrix)
    rep = spectral.spectral_bound_autonomous(gen)
    assert 0 < rep.value < CASE3


def test_family_apply_matches_dense():
    g = discretization.build_grid(12)
    fam = spectral.periodic_family(WN, kernels.tent(), g, D, growth.case2_eigen_periodic(), 20.0)
    X = np.random.default_rng(1).normal(size=(24, 3))
    for t in (0.0, 3.3, 17.0):
        np.testing.assert_allclose(fam.apply(t, X), fam(t) @ X, rtol=1e-13, atol=1e-13)


def test_monodromy_constant_generator_is_expm():
    from scipy.linalg import expm
    M = np.array([[-0.3, 0.2], [0.1, -0.5]])
    fam = spectral.constant_family(spectral.LinearGenerator(M, None, 1, 2), 2.0)
    Phi = spectral.monodromy(fam, 2.0, 0.01)
    np.testing.assert_allclose(Phi, expm(2.0 * M), rtol=1e-9)


def test_scalar_periodic_floquet_exponent():
    # x' = (a + b cos(2 pi t / T)) x has monodromy exp(a T) exactly
    a, b, T = -0.2, 0.7, 5.0

    class Scalar:
        m, n = 1, 1

        @staticmethod
        def apply(t, X):
            return (a + b * np.cos(2 * np.pi * t / T)) * X

    rep = spectral.periodic_bound(Scalar, T, 1e-3)
    assert rep.value == pytest.approx(-a, abs=1e-9)
    assert rep.omega == pytest.approx(a, abs=1e-9)


def test_autonomy_reduction_small_grid():
    g = discretization.build_grid(20)
    gen = spectral.build_generator(WN, kernels.tent(), g, 3.0, D)
    lam = spectral.spectral_bound_autonomous(gen).value
    per = spectral.periodic_bound(spectral.constant_family(gen, 20.0), 20.0, 0.01)
    assert abs(per.value + lam) <= 1e-6


def test_propagate_rejects_bad_dt():
    fam = spectral.constant_family(spectral.LinearGenerator(np.eye(2), None, 1, 2), 1.0)
    with pytest.raises(ValueError):
        spectral.propagate(fam, 1.0, 0.3, np.ones(2))


def test_refinement_stability_case1_small():
    vals = []
    for n in (100, 200):
        gen = spectral.build_generator(WN, kernels.tent(), discretization.build_grid(n), 3.0, D)
        vals.append(spectral.spectral_bound_autonomous(gen).value)
    assert abs(vals[0] - vals[1]) <= 2e-3
