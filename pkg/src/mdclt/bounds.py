"""Explicit Berry-Esseen bound formulas.

All logarithms are natural; ``log(en)`` means ``1 + ln n``. The absolute
constant ``C`` is unspecified by the theory and is always an input.
"""
from __future__ import annotations

import math
from typing import NamedTuple

from .core import MomentParams
from .errors import ParameterError


def _check(params, n, p, C):
    if not isinstance(params, MomentParams):
        raise ParameterError("params must be a MomentParams instance")
    if not n >= 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if int(p) != p or p < 1:
        raise ParameterError(f"p must be a positive integer, got {p}")
    if not C > 0:
        raise ParameterError(f"C must be positive, got {C}")


def theorem_bound_terms(params: MomentParams, n, p, C=1.0):
    """The two summands of :func:`theorem_bound` (each already scaled by C/sqrt(n))."""
    _check(params, n, p, C)
    log_en = 1.0 + math.log(n)
    log_ep = 1.0 + math.log(p)
    root = math.sqrt(1.0 + math.log(p) + math.log(n))
    s_lo = params.sigma_lower
    first = params.nu3 / s_lo**3 * log_en * log_ep**2 * root
    second = (params.nu3 ** (1 / 3) * params.sigma_upper ** (1 / 3)
              / (params.sigma_min * s_lo ** (1 / 3)) * log_ep * root)
    scale = C / math.sqrt(n)
    return scale * first, scale * second


def theorem_bound(params: MomentParams, n, p, C=1.0) -> float:
    """Bound on the rectangle distance for 1-dependent sums of length ``n``.

    ``C/sqrt(n) * (ν3/σ_lower³ log(en) log(ep)² sqrt(log(epn))
    + ν3^{1/3} σ_upper^{1/3} / (σ_min σ_lower^{1/3}) log(ep) sqrt(log(epn)))``
    """
    a, b = theorem_bound_terms(params, n, p, C)
    return a + b


def corollary_bound(params: MomentParams, n, m, p, C=1.0) -> float:
    """:func:`theorem_bound` evaluated at the effective sample size ``n/m``.

    ``n/m`` is used as a real number, including inside the logarithms.
    """
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be an integer >= 1, got {m}")
    if n < m:
        raise ParameterError(f"n={n} < m={m} gives an effective sample size below 1")
    return theorem_bound(params, n / m, p, C)


class EpsilonStar(NamedTuple):
    value: float
    raw: float
    clamped: bool


def epsilon_star(params: MomentParams, n, p, C=1.0) -> EpsilonStar:
    """Smoothing scale ``C((ν3/σ_lower²) log(en) log(ep)^{3/2} + (ν3 σ_upper/σ_lower)^{1/3} sqrt(log(ep)))``.

    The induction argument also needs ``ε >= ν1``; the returned ``value`` is
    ``max(raw, ν1)`` and ``clamped`` reports whether the floor was active.
    """
    _check(params, n, p, C)
    log_en = 1.0 + math.log(n)
    log_ep = 1.0 + math.log(p)
    raw = C * (params.nu3 / params.sigma_lower**2 * log_en * log_ep**1.5
               + (params.nu3 * params.sigma_upper / params.sigma_lower) ** (1 / 3) * math.sqrt(log_ep))
    return EpsilonStar(max(raw, params.nu1), raw, params.nu1 > raw)
