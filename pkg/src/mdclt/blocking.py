"""Reduction of an m-dependent sequence to a 1-dependent one by block averaging.

With ``n' = floor((n-1)/m)`` blocks, block ``i < n'`` is ``(X_{(i-1)m+1} + ... + X_{im}) / m``
and the last block ``(X_{(n'-1)m+1} + ... + X_n) / m`` absorbs the remainder,
so it holds between ``m+1`` and ``2m`` terms. Then ``m * sum(X') = sum(X)``.

The ``"drop"`` remainder policy instead keeps ``floor(n/m)`` full blocks and
discards the tail, which breaks the sum identity but gives equal-size blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .core import BlockedSpec, ProcessSpec, SampleBatch
from .errors import ParameterError, RangeError
from .gaussian import sample_sum_gaussian
from .params import _sup_moments, combine_nu, scan_intervals
from .procgen import _paths_chunk, covariance_model, sample_paths, sum_covariance

REMAINDER_POLICIES = ("absorb", "drop")


def n_blocks(n, m, remainder="absorb"):
    if int(m) != m or m < 1:
        raise ParameterError(f"block length must be >= 1, got {m}")
    if remainder not in REMAINDER_POLICIES:
        raise ParameterError(f"remainder policy must be one of {REMAINDER_POLICIES}")
    if remainder == "absorb":
        if n <= m:
            raise RangeError(f"need n >= m + 1 for blocking, got n={n}, m={m}")
        return (n - 1) // m
    if n < m:
        raise RangeError(f"need n >= m for blocking, got n={n}, m={m}")
    return n // m


def block_bounds(n, m, remainder="absorb"):
    """1-based closed index ranges ``[(start, end), ...]`` of the blocks."""
    nb = n_blocks(n, m, remainder)
    out = [((i - 1) * m + 1, i * m) for i in range(1, nb + 1)]
    if remainder == "absorb":
        out[-1] = (out[-1][0], n)
    return out


def block_average(x, m, remainder="absorb"):
    """Block-average along axis ``-2`` of an ``(..., n, p)`` array."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-2]
    nb = n_blocks(n, m, remainder)
    head = x[..., :(nb - 1) * m, :]
    head = head.reshape(*x.shape[:-2], nb - 1, m, x.shape[-1]).sum(axis=-2)
    stop = n if remainder == "absorb" else nb * m
    last = x[..., (nb - 1) * m:stop, :].sum(axis=-2, keepdims=True)
    return np.concatenate([head, last], axis=-2) / m


def block_reduce(batch: SampleBatch, m: int, remainder: str = "absorb") -> SampleBatch:
    """Blocked batch; its spec is a :class:`BlockedSpec` marker."""
    spec = batch.spec
    base = spec.base if isinstance(spec, BlockedSpec) else spec
    data = block_average(batch.data, m, remainder)
    return SampleBatch(data, BlockedSpec(base, int(m), batch.n, remainder), batch.master_seed)


def blocked_interval_cov(spec: ProcessSpec, n, m, i, j, remainder="absorb"):
    """Exact ``Var[S X'_[i,j]]`` via the block map: ``Var[S X_[start, end]] / m²``."""
    bounds = block_bounds(n, m, remainder)
    if not (1 <= i <= j <= len(bounds)):
        raise RangeError(f"need 1 <= i <= j <= n'={len(bounds)}")
    return sum_covariance(spec, bounds[i - 1][0], bounds[j - 1][1]) / m**2


def blocked_lag_cov(spec: ProcessSpec, n, m, i, lag, remainder="absorb"):
    """``Cov(X'_i, X'_{i+lag})`` from the lag covariances by bilinearity."""
    bounds = block_bounds(n, m, remainder)
    if not (1 <= i and i + lag <= len(bounds)):
        raise RangeError("block index out of range")
    model = covariance_model(spec)
    (a0, a1), (b0, b1) = bounds[i - 1], bounds[i + lag - 1]
    out = np.zeros((spec.p, spec.p))
    for a in range(a0, a1 + 1):
        for b in range(b0, b1 + 1):
            out += model.lag(b - a)
    return out / m**2


def blocked_sigmas(spec: ProcessSpec, n, m, remainder="absorb"):
    """Assumption constants (with ``m = 1``) of the blocked sequence, exactly.

    The blocked sequence is not stationary (the last block is longer), so every
    interval is scanned.
    """
    nb = n_blocks(n, m, remainder)
    return scan_intervals(lambda i, j: blocked_interval_cov(spec, n, m, i, j, remainder),
                          nb, 1, stationary=False)


@dataclass(frozen=True)
class BlockedNu:
    nu1: float
    nu3: float
    nu1_stderr: float
    nu3_stderr: float
    families: dict

    def __iter__(self):
        return iter((self.nu1, self.nu3))


def blocked_nu(spec: ProcessSpec, n, m, n_mc=10**5, seed=0, threads=1, remainder="absorb"):
    """Monte Carlo ``nu1, nu3`` of the blocked sequence and its Gaussian analog.

    By stationarity only two block laws occur: a full block of ``m`` terms and
    the last block of ``L`` terms; both are simulated from paths of length ``L``.
    """
    bounds = block_bounds(n, m, remainder)
    last_len = bounds[-1][1] - bounds[-1][0] + 1
    key = rng.derive_key(seed, "blocked-nu-x")
    chunk = max(1, 2**21 // ((last_len + spec.m) * spec.p))
    paths = np.concatenate(rng.map_chunks(lambda a, b: _paths_chunk(spec, key, last_len, a, b),
                                          n_mc, chunk, threads), axis=0)
    fams = {
        "x_block": _sup_moments(paths[:, :m, :].sum(axis=1) / m),
        "x_last": _sup_moments(paths.sum(axis=1) / m),
        "y_block": _sup_moments(sample_sum_gaussian(
            sum_covariance(spec, 1, m) / m**2, n_mc, rng.derive_key(seed, "blocked-nu-y", 0), threads)),
        "y_last": _sup_moments(sample_sum_gaussian(
            sum_covariance(spec, 1, last_len) / m**2, n_mc,
            rng.derive_key(seed, "blocked-nu-y", 1), threads)),
    }
    nu1, nu3, se1, se3 = combine_nu(list(fams.values()))
    return BlockedNu(float(nu1), float(nu3), float(se1), float(se3),
                     {k: tuple(map(float, v[0])) for k, v in fams.items()})


@dataclass(frozen=True)
class DependenceCheck:
    statistic: float
    stderr: float
    null_q95: float
    lags: tuple

    @property
    def passed(self):
        return self.statistic <= self.null_q95


def _max_cross_cov(x, y, lags):
    best = 0.0
    for ell in lags:
        a = x[:, :-ell, :]
        b = y[:, ell:, :]
        c = np.einsum("rtk,rtl->kl", a, b) / (a.shape[0] * a.shape[1])
        best = max(best, float(np.max(np.abs(c))))
    return best


def verify_m_dependence(source, lag, n=64, R=2000, seed=0, max_extra_lags=3,
                        n_perm=99, skip_last=None):
    """Largest empirical cross-covariance entry at lags ``lag+1 .. lag+max_extra_lags``.

    ``source`` is a :class:`SampleBatch` or a :class:`ProcessSpec` (sampled with
    ``n``, ``R``, ``seed``). The null distribution pairs the lagged copy with a
    randomly permuted replicate, which makes the two factors independent while
    keeping their marginal laws. For blocked batches the last (longer) block is
    left out by default.
    """
    if isinstance(source, ProcessSpec):
        source = sample_paths(source, n, R, seed)
    x = source.data
    if skip_last is None:
        skip_last = isinstance(source.spec, BlockedSpec)
    if skip_last:
        x = x[:, :-1, :]
    lags = tuple(ell for ell in range(lag + 1, lag + 1 + max_extra_lags) if ell < x.shape[1])
    if not lags:
        raise RangeError(f"sequence of length {x.shape[1]} has no lags beyond {lag}")
    stat = _max_cross_cov(x, x, lags)
    a, b = x[:, :-lags[0], :], x[:, lags[0]:, :]
    prod = np.einsum("rtk,rtl->rkl", a, b) / a.shape[1]
    stderr = float(np.max(prod.std(axis=0, ddof=1)) / math.sqrt(x.shape[0]))
    gen = np.random.default_rng(rng.derive_key(seed, "perm-null"))
    null = [_max_cross_cov(x, x[gen.permutation(x.shape[0])], lags) for _ in range(n_perm)]
    return DependenceCheck(stat, stderr, float(np.quantile(null, 0.95)), lags)
