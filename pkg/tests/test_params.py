import math

import numpy as np
import pytest

from mdclt import estimate_nu, extract_sigmas, make_ma_process, moment_params, sum_covariance
from mdclt.errors import DegeneracyError, ParameterError
from mdclt.params import scan_intervals


def test_iid_identity():
    s = extract_sigmas(make_ma_process(3, 0, [np.eye(3)]), 20, 1)
    assert tuple(s) == pytest.approx((1.0, 1.0, 1.0))


def test_ma1_closed_form(ma1_p1):
    n = 50
    s = extract_sigmas(ma1_p1, n, 1)
    assert s.sigma_min**2 == pytest.approx(1.25)
    assert s.sigma_lower**2 == pytest.approx(1.25)
    assert s.sigma_upper**2 == pytest.approx(1.25 + (n - 1) / n)
    assert s.argmin_var == 1 and s.argmax_eig == n


def test_stationary_scan_matches_full(ma2_p3):
    a = extract_sigmas(ma2_p3, 9, 2, stationary=True)
    b = extract_sigmas(ma2_p3, 9, 2, stationary=False)
    assert tuple(a) == pytest.approx(tuple(b), rel=1e-12)


def test_m_zero_rejected(ma1_p1):
    iid = make_ma_process(1, 0, [1.0])
    with pytest.raises(ParameterError):
        extract_sigmas(iid, 10, 0)
    with pytest.raises(ParameterError):
        extract_sigmas(ma1_p1, 10, 0)


def test_singular_named():
    spec = make_ma_process(2, 0, [[[1.0, 1.0], [1.0, 1.0]]])
    with pytest.raises(DegeneracyError, match="length 1"):
        extract_sigmas(spec, 5, 1)


def test_certifies_random_intervals(ma2_p3):
    n, m = 40, 2
    s = extract_sigmas(ma2_p3, n, m)
    gen = np.random.default_rng(0)
    for _ in range(200):
        i, j = sorted(gen.integers(1, n + 1, 2))
        L = j - i + 1
        w = np.linalg.eigvalsh(sum_covariance(ma2_p3, i, j))
        d = L * min(m, L)
        assert d * s.sigma_lower**2 <= w[0] * (1 + 1e-9)
        assert w[-1] <= d * s.sigma_upper**2 * (1 + 1e-9)


def test_nu_gaussian_oracle():
    nu = estimate_nu(make_ma_process(1, 0, [1.0], "gaussian"), 200_000, 1)
    assert abs(nu.nu1 - math.sqrt(2 / math.pi)) < 4 * nu.nu1_stderr
    assert abs(nu.nu3 - 2 * math.sqrt(2 / math.pi)) < 4 * nu.nu3_stderr


def test_nu_rademacher():
    nu = estimate_nu(make_ma_process(1, 0, [1.0], "rademacher"), 200_000, 1)
    assert nu.x_moments == (1.0, 1.0)
    assert nu.nu1 == 1.0
    assert abs(nu.nu3 - 2 * math.sqrt(2 / math.pi)) < 4 * nu.nu3_stderr


def test_nu_minimum_mc():
    with pytest.raises(ParameterError):
        estimate_nu(make_ma_process(1, 0, [1.0]), 10)


def test_moment_params_meta(ma2_p3):
    mp = moment_params(ma2_p3, 10, 2, 5000, 3)
    assert mp.meta["spec_digest"] == ma2_p3.digest
    assert mp.violations() == []


def test_scan_requires_positive_n():
    with pytest.raises(ParameterError):
        scan_intervals(lambda i, j: np.eye(1), 0, 1)


@pytest.mark.parametrize("innovation", ["gaussian", "rademacher", "exponential"])
def test_nu_jensen(ma2_p3, innovation):
    spec = make_ma_process(3, 2, list(ma2_p3.coeffs), innovation)
    nu = estimate_nu(spec, 50_000, 4)
    # d(nu3^(1/3)) = nu3^(-2/3)/3 * d(nu3)
    se = math.hypot(nu.nu1_stderr, nu.nu3 ** (-2 / 3) / 3 * nu.nu3_stderr)
    assert nu.nu1 <= nu.nu3 ** (1 / 3) + 3 * se
