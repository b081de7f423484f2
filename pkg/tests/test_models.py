import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_growth import models

WN = models.wn_reaction()


def test_wn_linearization():
    np.testing.assert_allclose(WN.df0(), [[-0.029, 1.92], [0.16, -0.01]], atol=1e-15)
    np.testing.assert_array_equal(WN.cap_v, [5000.0, 100.0])
    np.testing.assert_allclose(models.WNParams().diffusion, [0.03, 2.0])


def test_wn_rates_by_hand():
    u = np.array([1000.0, 40.0])
    f = WN.f(u)
    assert f[0] == pytest.approx(0.24 * 0.16 * (40 / 100) * (5000 - 1000) - 0.029 * 1000)
    assert f[1] == pytest.approx(1.0 * 0.16 * (1000 / 100) * (100 - 40) - 0.01 * 40)


def test_wn_params_validated():
    with pytest.raises(ValueError):
        models.WNParams(gamma_R=0.0)
    with pytest.raises(KeyError):
        models.by_label("sir")


def test_validate_wn_passes():
    rep = models.validate_F(WN, samples=500, seed=3)
    assert rep.passed, rep.as_dict()
    assert rep.conditions["subhomogeneous"].worst_margin > 0   # strict for WN
    assert rep.conditions["cap"].worst_margin > 0


def test_validate_detects_competition():
    A = np.array([[-1.0, -0.5], [0.2, -1.0]])
    rep = models.validate_F(models.linear_reaction(A, [1.0, 1.0]), samples=50)
    assert not rep.conditions["cooperative"].passed


def test_validate_detects_reducible_pattern():
    A = np.array([[0.1, 0.0], [0.3, -0.2]])
    rep = models.validate_F(models.linear_reaction(A, [1.0, 1.0]), samples=20)
    assert not rep.conditions["irreducible"].passed


def test_validate_detects_superlinear_growth():
    def f(u):
        return u * u - u

    def jac(u):
        return np.array([[2 * u[0] - 1]])

    sysm = models.ReactionSystem(1, f, jac, np.array([0.5]), {}, "quadratic")
    rep = models.validate_F(sysm, samples=200)
    assert not rep.conditions["subhomogeneous"].passed


def test_linear_system_is_non_strictly_subhomogeneous():
    rep = models.validate_F(models.linear_reaction([[-1.0]], [1.0]), samples=100)
    assert rep.conditions["subhomogeneous"].passed
    assert "non-strict" in rep.conditions["subhomogeneous"].note


def test_cap_violation_detected():
    sysm = models.logistic_reaction(r=1.0, K=2.0, cap=1.0)
    assert not models.validate_F(sysm, samples=50).conditions["cap"].passed


@given(st.floats(0, 5000), st.floats(0, 100))
def test_jacobian_matches_differences(iv, ir):
    assert models.jacobian_fd_check(WN, [iv, ir]) <= 1e-8


@given(st.floats(1e-3, 1.0), st.floats(0, 5000), st.floats(0, 100))
def test_wn_subhomogeneous(alpha, iv, ir):
    u = np.array([iv, ir])
    gap = WN.f(alpha * u) - alpha * WN.f(u)
    assert np.all(gap >= -1e-9 * (1 + np.abs(WN.f(u))))


@given(st.floats(0, 100))
def test_wn_cap_faces_point_inward(ir):
    assert WN.f(np.array([5000.0, ir]))[0] <= 0
    assert WN.f(np.array([ir * 50.0, 100.0]))[1] <= 0
