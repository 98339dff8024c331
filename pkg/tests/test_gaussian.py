import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdclt import nazarov_bound, phi_smoothed, psd_factor, sample_sum_gaussian
from mdclt.errors import DegeneracyError, ParameterError, ShapeError
from mdclt.gaussian import PHI_MAX, std_normal_cdf


def test_std_normal_cdf():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(0.1) - std_normal_cdf(-0.1) == pytest.approx(0.0796557, abs=1e-7)


def test_psd_factor_reconstructs():
    A = np.random.default_rng(0).standard_normal((4, 4))
    cov = A @ A.T
    L = psd_factor(cov)
    np.testing.assert_allclose(L @ L.T, cov, atol=1e-10)


def test_psd_factor_singular_ok():
    L = psd_factor(np.ones((3, 3)))
    np.testing.assert_allclose(L @ L.T, np.ones((3, 3)), atol=1e-12)


def test_psd_factor_errors():
    with pytest.raises(ShapeError):
        psd_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(DegeneracyError):
        psd_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_identity_variance():
    y = sample_sum_gaussian(np.eye(3), 20_000, 1)
    se = math.sqrt(2 / 20_000)
    assert np.all(np.abs(y.var(axis=0, ddof=1) - 1) < 5 * se)


def test_procgen_oracle_variance():
    y = sample_sum_gaussian(np.array([[8.0]]), 20_000, 2)
    assert abs(y.var(ddof=1) - 8) < 5 * 8 * math.sqrt(2 / 20_000)


def test_zero_cov():
    assert np.all(sample_sum_gaussian(np.zeros((2, 2)), 50, 0) == 0)


def test_thread_invariant():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.array_equal(sample_sum_gaussian(cov, 3000, 5, 1), sample_sum_gaussian(cov, 3000, 5, 4))


def test_nazarov_examples():
    assert nazarov_bound(0.0, 1.0, 7) == 0.0
    assert nazarov_bound(1.0, 1.0, 1) == 1.0
    assert nazarov_bound(0.3, 4.0, 5) == pytest.approx(nazarov_bound(0.3, 1.0, 5) / 2)
    with pytest.raises(DegeneracyError):
        nazarov_bound(0.1, 0.0, 2)


def test_phi_smoothed_examples():
    assert phi_smoothed(np.zeros(4), np.zeros(4), 0.3) == pytest.approx(0.5**4)
    assert phi_smoothed(np.zeros(3), np.full(3, 10 * 0.2), 0.2) > 1 - 1e-6
    with pytest.raises(ParameterError):
        phi_smoothed(np.zeros(2), np.zeros(2), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 2.0), st.floats(1e-4, 1e-2))
def test_phi_smoothed_lipschitz(x0, r0, eps, h):
    x = np.array([x0, 0.2])
    r = np.array([r0, 0.5])
    a = phi_smoothed(x, r, eps)
    b = phi_smoothed(x + np.array([h, 0.0]), r, eps)
    assert abs(a - b) / h <= PHI_MAX / eps * (1 + 1e-9)
