"""Assumption constants of a process.

The three variance constants are normalized minima/maxima of

    Var[S X_[i,j]] / (len * min(m, len)),     len = j - i + 1,

taken over every interval of ``[1, n]`` (marginal variances for ``sigma_min``,
extreme eigenvalues for ``sigma_lower``/``sigma_upper``). The third-moment
constants come from Monte Carlo over single vectors ``X_i`` and their Gaussian
analog ``Y_i ~ N(0, Γ_0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .core import MomentParams, ProcessSpec
from .errors import DegeneracyError, NumericError, ParameterError
from .gaussian import sample_sum_gaussian
from .procgen import _paths_chunk, covariance_model, sum_covariance


@dataclass(frozen=True)
class SigmaScan:
    sigma_min: float
    sigma_lower: float
    sigma_upper: float
    # lengths (or intervals) attaining each extreme
    argmin_var: object
    argmin_eig: object
    argmax_eig: object

    def __iter__(self):
        return iter((self.sigma_min, self.sigma_lower, self.sigma_upper))


def _ratios(cov, length, m):
    w = np.linalg.eigvalsh(cov)
    div = length * min(m, length)
    return float(np.min(np.diag(cov))) / div, float(w[0]) / div, float(w[-1]) / div, w[0]


def scan_intervals(interval_cov, n, m, stationary=False):
    """Scan ``interval_cov(i, j)`` over all intervals of ``[1, n]``.

    With ``stationary=True`` only ``[1, len]`` is visited (O(n) instead of O(n²)).
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if int(m) != m or m < 1:
        raise ParameterError(f"the assumption normalization needs m >= 1, got m={m}")
    best = [math.inf, math.inf, -math.inf]
    where = [None, None, None]
    starts = (1,) if stationary else range(1, n + 1)
    for i in starts:
        for j in range(i, n + 1):
            length = j - i + 1
            tag = length if stationary else (i, j)
            v, lo, hi, lam = _ratios(interval_cov(i, j), length, m)
            if not lam > 0:
                raise DegeneracyError(
                    f"Var[S X] is singular for interval length {length} (lambda_min={lam:.3e})")
            if v < best[0]:
                best[0], where[0] = v, tag
            if lo < best[1]:
                best[1], where[1] = lo, tag
            if hi > best[2]:
                best[2], where[2] = hi, tag
    return SigmaScan(math.sqrt(best[0]), math.sqrt(best[1]), math.sqrt(best[2]), *where)


def extract_sigmas(spec: ProcessSpec, n: int, m: int | None = None, stationary: bool = True):
    """``(sigma_min, sigma_lower, sigma_upper)`` for ``spec`` on ``[1, n]``.

    ``m`` defaults to ``spec.m``; a larger value (an over-estimate of the
    dependence range) is accepted, a smaller one is rejected. Since ``m`` enters
    the divisor as ``min(m, len)``, ``m = 0`` is invalid.
    """
    m = spec.m if m is None else m
    if m < spec.m:
        raise ParameterError(f"declared m={m} is below the process order {spec.m}")
    return scan_intervals(lambda i, j: sum_covariance(spec, i, j), n, m, stationary)


@dataclass(frozen=True)
class NuEstimate:
    nu1: float
    nu3: float
    nu1_stderr: float
    nu3_stderr: float
    x_moments: tuple   # (E|X|_inf, E|X|_inf^3)
    y_moments: tuple

    def __iter__(self):
        return iter((self.nu1, self.nu3))


def _sup_moments(samples):
    s = np.max(np.abs(samples), axis=-1)
    if not np.all(np.isfinite(s)):
        raise NumericError("non-finite sample while estimating moments")
    m1, m3 = s.mean(), (s**3).mean()
    n = s.size
    return (m1, m3), (s.std(ddof=1) / math.sqrt(n), (s**3).std(ddof=1) / math.sqrt(n))


def combine_nu(families):
    """Per-moment maximum over ``[(moments, stderrs), ...]``."""
    i1 = max(range(len(families)), key=lambda k: families[k][0][0])
    i3 = max(range(len(families)), key=lambda k: families[k][0][1])
    return (families[i1][0][0], families[i3][0][1], families[i1][1][0], families[i3][1][1])


def estimate_nu(spec: ProcessSpec, n_mc: int = 10**6, seed: int = 0, threads: int = 1) -> NuEstimate:
    """Monte Carlo ``nu1 = max E‖·‖∞`` and ``nu3 = max E‖·‖∞³`` over X_i and Y_i."""
    if n_mc < 1000:
        raise ParameterError(f"n_mc must be >= 1000, got {n_mc}")
    key = rng.derive_key(seed, "nu-x")
    chunk = max(1, 2**21 // ((spec.m + 1) * spec.p))
    x = np.concatenate(rng.map_chunks(lambda a, b: _paths_chunk(spec, key, 1, a, b)[:, 0, :],
                                      n_mc, chunk, threads), axis=0)
    y = sample_sum_gaussian(covariance_model(spec).lag_covs[0], n_mc,
                            rng.derive_key(seed, "nu-y"), threads)
    fx, fy = _sup_moments(x), _sup_moments(y)
    nu1, nu3, se1, se3 = combine_nu([fx, fy])
    return NuEstimate(float(nu1), float(nu3), float(se1), float(se3), fx[0], fy[0])


def moment_params(spec: ProcessSpec, n: int, m: int | None = None, n_mc: int = 10**6,
                  seed: int = 0, threads: int = 1) -> MomentParams:
    m = spec.m if m is None else m
    scan = extract_sigmas(spec, n, m)
    nu = estimate_nu(spec, n_mc, seed, threads)
    return MomentParams(scan.sigma_min, scan.sigma_lower, scan.sigma_upper, nu.nu1, nu.nu3,
                        n=int(n), m=int(m),
                        meta={"n_mc": int(n_mc), "seed": int(seed), "spec_digest": spec.digest,
                              "nu1_stderr": nu.nu1_stderr, "nu3_stderr": nu.nu3_stderr})
