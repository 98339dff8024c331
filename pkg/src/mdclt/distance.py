"""Monte Carlo distances over hyper-rectangles, band probabilities, smoothing.

The supremum over all corners ``r ∈ R^p`` is replaced by a maximum over a
finite :class:`RectangleFamily`, so every estimate here is a lower bound of the
exact supremum (up to sampling noise).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from . import kernels, rng
from .core import DistanceEstimate, MomentParams, Rectangle, band_membership
from .errors import IncompleteAuditError, ParameterError, ShapeError, UndefinedPointError


@dataclass(frozen=True)
class FamilyConfig:
    """How to build a rectangle family from pooled samples.

    A full product grid of ``grid_levels`` pooled marginal quantiles per
    coordinate is used when it has at most ``max_grid`` corners; otherwise
    ``random_corners`` corners are drawn coordinate-wise from the pooled
    marginals. The diagonal corners ``t * 1`` sit at ``diagonal_levels``
    quantiles of the pooled coordinate maxima.
    """

    grid_levels: int = 32
    random_corners: int = 2000
    diagonal: bool = True
    diagonal_levels: int = 512
    max_grid: int = 10**6
    seed: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class RectangleFamily:
    """Finite set of corners: product grid, explicit corners, diagonal levels."""

    p: int
    levels: Optional[tuple] = None
    corners: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    diagonal: Optional[np.ndarray] = None
    cfg: Optional[FamilyConfig] = None

    @classmethod
    def from_corners(cls, corners):
        corners = np.atleast_2d(np.asarray(corners, dtype=np.float64))
        return cls(p=corners.shape[1], corners=corners)

    @property
    def n_grid(self):
        return 0 if self.levels is None else int(np.prod([len(lv) for lv in self.levels]))

    @property
    def n_explicit(self):
        return int(self.corners.shape[0])

    @property
    def n_diagonal(self):
        return 0 if self.diagonal is None else int(len(self.diagonal))

    def __len__(self):
        return self.n_grid + self.n_explicit + self.n_diagonal

    def corner(self, index):
        """Corner number ``index`` in the order used by :meth:`counts`."""
        if index < self.n_grid:
            shape = [len(lv) for lv in self.levels]
            sub = np.unravel_index(index, shape)
            return np.array([lv[s] for lv, s in zip(self.levels, sub)])
        index -= self.n_grid
        if index < self.n_explicit:
            return self.corners[index].copy()
        return np.full(self.p, self.diagonal[index - self.n_explicit])

    def counts(self, samples, shift=0.0, threads=1):
        """``#{x in samples: x ⪯ r + shift*1}`` for every corner ``r``."""
        x = _as_samples(samples)
        if x.shape[1] != self.p:
            raise ShapeError(f"samples have dimension {x.shape[1]}, family has {self.p}")
        parts = []
        if self.levels is not None:
            parts.append(_grid_counts(x, [lv + shift for lv in self.levels]))
        if self.n_explicit:
            parts.append(kernels.rect_counts(x, self.corners + shift, threads))
        if self.n_diagonal:
            mx = np.sort(x.max(axis=1))
            parts.append(np.searchsorted(mx, self.diagonal + shift, side="right"))
        return np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, np.int64)


def _as_samples(samples):
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError(f"samples must be R x p, got shape {x.shape}")
    return x


def _grid_counts(x, levels):
    # bin each sample by how many levels lie strictly below it, then a cumulative
    # sum along every axis counts the samples below each grid corner
    shape = [len(lv) + 1 for lv in levels]
    idx = [np.searchsorted(lv, x[:, k], side="left") for k, lv in enumerate(levels)]
    flat = np.ravel_multi_index(idx, shape)
    h = np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)
    for ax in range(len(shape)):
        h = np.cumsum(h, axis=ax)
    return h[tuple(slice(0, s - 1) for s in shape)].ravel()


def build_rectangle_family(samplesX, samplesY=None, cfg: FamilyConfig = FamilyConfig()):
    """Corner family from the pooled samples (see :class:`FamilyConfig`)."""
    parts = [_as_samples(samplesX)]
    if samplesY is not None:
        parts.append(_as_samples(samplesY))
    if any(s.shape[0] == 0 for s in parts):
        raise ParameterError("cannot build a rectangle family from empty samples")
    if len({s.shape[1] for s in parts}) != 1:
        raise ShapeError("samples have different dimensions")
    pooled = np.concatenate(parts, axis=0)
    p = pooled.shape[1]
    G = int(cfg.grid_levels)
    levels = None
    corners = np.zeros((0, p))
    if G > 0 and G**p <= cfg.max_grid:
        q = np.arange(1, G + 1) / (G + 1)
        levels = tuple(np.quantile(pooled[:, k], q, method="inverted_cdf") for k in range(p))
    elif cfg.random_corners > 0:
        gen = np.random.default_rng(rng.derive_key(cfg.seed, "rectangle-family"))
        pick = gen.integers(0, pooled.shape[0], size=(cfg.random_corners, p))
        corners = pooled[pick, np.arange(p)]
    diagonal = None
    if cfg.diagonal and cfg.diagonal_levels > 0:
        q = np.arange(1, cfg.diagonal_levels + 1) / (cfg.diagonal_levels + 1)
        diagonal = np.quantile(pooled.max(axis=1), q, method="inverted_cdf")
    return RectangleFamily(p=p, levels=levels, corners=corners, diagonal=diagonal, cfg=cfg)


def binomial_stderr(*replicates):
    """Worst-case binomial standard error ``sqrt(sum 1/(4R))``."""
    return math.sqrt(sum(0.25 / r for r in replicates))


def estimate_mu(samplesX, samplesY, family: RectangleFamily, bootstrap: int = 0,
                seed: int = 0, threads: int = 1) -> DistanceEstimate:
    """``max_r |F_X(r) - F_Y(r)|`` over the family, with empirical rectangle CDFs.

    The default ``stderr`` is the worst-case binomial rule; with ``bootstrap > 0``
    it is the standard deviation of that many resampled estimates.
    """
    x, y = _as_samples(samplesX), _as_samples(samplesY)
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    value = _mu_value(x, y, family, threads)
    stderr = binomial_stderr(x.shape[0], y.shape[0])
    if bootstrap > 0:
        gen = np.random.default_rng(rng.derive_key(seed, "mu-bootstrap"))
        boots = [_mu_value(x[gen.integers(0, x.shape[0], x.shape[0])],
                           y[gen.integers(0, y.shape[0], y.shape[0])], family, threads)
                 for _ in range(bootstrap)]
        stderr = float(np.std(boots, ddof=1))
    return DistanceEstimate(value, stderr, len(family), x.shape[0], y.shape[0], "mu")


def _mu_value(x, y, family, threads):
    fx = family.counts(x, threads=threads) / x.shape[0]
    fy = family.counts(y, threads=threads) / y.shape[0]
    return float(np.max(np.abs(fx - fy), initial=0.0))


def estimate_kappa(samples, delta, family: RectangleFamily, threads: int = 1) -> DistanceEstimate:
    """``max_r P[x ∈ A_{r,δ}]`` over the family.

    Since the inner rectangle sits inside the outer one, the band count is the
    difference of the two rectangle counts.
    """
    if not delta >= 0:
        raise ParameterError(f"delta must be >= 0, got {delta}")
    x = _as_samples(samples)
    band = family.counts(x, delta, threads) - family.counts(x, -delta, threads)
    value = float(np.max(band, initial=0)) / x.shape[0]
    return DistanceEstimate(value, binomial_stderr(x.shape[0]), len(family), x.shape[0], 0, "kappa")


def _w(x, r):
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if x.shape[-1] != r.shape[-1]:
        raise ShapeError("x and r have different dimensions")
    return np.max(x - r, axis=-1)


def smoothing_f(x, r, delta, eps):
    """Piecewise-linear band smoother driven by ``w = max_k (x_k - r_k)``.

    Ramps up on ``(-δ-ε, -δ]``, equals 1 on ``(-δ, δ]``, ramps down on
    ``(δ, δ+ε]`` and is 0 elsewhere.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if not delta >= 0:
        raise ParameterError(f"delta must be >= 0, got {delta}")
    w = _w(x, r)
    up = (w + delta + eps) / eps
    down = (delta + eps - w) / eps
    out = np.where(w <= -delta - eps, 0.0,
          np.where(w <= -delta, up,
          np.where(w <= delta, 1.0,
          np.where(w <= delta + eps, down, 0.0))))
    return out if out.ndim else float(out)


def grad_f_l1(x, r, delta, eps, guard=1e-9):
    """ℓ1 norm of the gradient of :func:`smoothing_f` at ``x``, via band indicators.

    ``(1/ε)(1{x ∈ A_{r-(δ+ε/2)1, ε/2}} + 1{x ∈ A_{r+(δ+ε/2)1, ε/2}})``. Defined
    only off the kinks of the piecewise function and where the maximizing
    coordinate of ``x - r`` is unique; elsewhere :class:`UndefinedPointError`.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    d = np.sort(x - r)
    w = d[-1]
    for kink in (-delta - eps, -delta, delta, delta + eps):
        if abs(w - kink) <= guard:
            raise UndefinedPointError(f"w={w!r} is within {guard} of a kink at {kink}")
    if d.size > 1 and d[-1] - d[-2] <= guard:
        raise UndefinedPointError("maximizing coordinate of x - r is not unique")
    h = eps / 2
    lower = Rectangle(r - (delta + h), h)
    upper = Rectangle(r + (delta + h), h)
    return (float(band_membership(x, lower)) + float(band_membership(x, upper))) / eps


@dataclass(frozen=True)
class AuditReport:
    c1: float
    c1_ratios: dict
    lemma2_terms: dict
    lemma2_rhs: float
    lemma2_sup_index: Optional[int]
    mu_n: Optional[float]
    settings: dict

    def to_dict(self):
        return {"c1": self.c1, "c1_ratios": {str(k): v for k, v in self.c1_ratios.items()},
                "lemma2_terms": self.lemma2_terms, "lemma2_rhs": self.lemma2_rhs,
                "lemma2_sup_index": self.lemma2_sup_index, "mu_n": self.mu_n,
                "settings": self.settings}


def _val(v):
    return float(v.value) if isinstance(v, DistanceEstimate) else float(v)


def audit_induction_lemmas(mu_seq: Mapping[int, float], kappa_fn: Callable[[int, float], float],
                           params: MomentParams, n: int, p: int, delta: float, eps: float,
                           C: float = 1.0, c_delta: float = 1.0) -> AuditReport:
    """Diagnostics for the two inductive inequalities between μ_i and κ_i.

    * ``c1`` is the smallest constant for which, at every grid point ``i``,
      ``κ_i(δ) <= c1/sqrt(max(i-2,1)) * ((δ+ν1)/σ_min sqrt(log(ep)) + max_{j<=i-2} sqrt(j) μ_j)``.
    * the second inequality's right-hand side for the given ``eps`` and constant
      ``C`` is evaluated term by term, with ``ε_i² = ε² + max(σ_lower²(n-i) - σ_upper², 0)``
      and ``δ_i = c_delta ε_i sqrt(log(pn))``; its supremum runs over grid points
      ``n/2 + 1 < i <= n``.

    ``kappa_fn(i, δ)`` returns an estimate (float or :class:`DistanceEstimate`)
    and may raise ``KeyError`` or return ``None`` for points it cannot supply.
    """
    if not mu_seq:
        raise IncompleteAuditError("empty mu grid", gaps=("mu",))
    grid = sorted(int(i) for i in mu_seq)
    mu = {int(i): _val(v) for i, v in mu_seq.items()}
    if grid[0] < 1 or grid[-1] > n:
        raise IncompleteAuditError(f"mu grid must lie in [1, {n}]", gaps=tuple(grid))
    gaps = []

    def kappa(i, d):
        try:
            v = kappa_fn(i, d)
        except KeyError:
            v = None
        if v is None:
            gaps.append((i, d))
            return None
        return _val(v)

    log_ep = 1.0 + math.log(p)
    ratios = {}
    for i in grid:
        k = kappa(i, delta)
        if k is None:
            continue
        prev = [math.sqrt(j) * mu[j] for j in grid if j <= i - 2]
        denom = (delta + params.nu1) / params.sigma_min * math.sqrt(log_ep) + max(prev, default=0.0)
        ratios[i] = k * math.sqrt(max(i - 2, 1)) / denom

    s_lo, s_hi, nu3 = params.sigma_lower, params.sigma_upper, params.nu3
    log_pn = math.log(p * n)
    t1 = C / math.sqrt(n) * (nu3 * log_ep**1.5 / s_lo**3 + eps * log_ep / params.sigma_min)
    t2 = C / (p * n) * nu3 * (s_hi / (eps**3 * s_lo) + 1.0 / (eps * s_lo**2))
    factor = C * nu3 * (s_hi / (eps**2 * s_lo) + math.log(1 + math.sqrt(n) * s_lo / eps) / s_lo**2) \
        * log_ep**1.5
    upper = [i for i in grid if n / 2 + 1 < i <= n and i >= 2]
    if not upper:
        gaps.append(("no grid point in", (n / 2 + 1, n)))
    best, best_i = 0.0, None
    for i in upper:
        eps_i = math.sqrt(eps**2 + max(s_lo**2 * (n - i) - s_hi**2, 0.0))
        k = kappa(i - 1, c_delta * eps_i * math.sqrt(log_pn))
        if k is not None and (best_i is None or k / eps_i > best):
            best, best_i = k / eps_i, i
    if gaps:
        raise IncompleteAuditError(f"audit is missing {len(gaps)} point(s): {gaps[:5]}", gaps=gaps)
    terms = {"smooth": t1, "remainder": t2, "factor": factor, "sup_kappa_over_eps": best,
             "anticoncentration": factor * best}
    return AuditReport(
        c1=max(ratios.values()),
        c1_ratios=ratios,
        lemma2_terms=terms,
        lemma2_rhs=t1 + t2 + factor * best,
        lemma2_sup_index=best_i,
        mu_n=mu.get(n),
        settings={"n": n, "p": p, "delta": delta, "eps": eps, "C": C, "c_delta": c_delta,
                  "params": params.to_dict()},
    )


@dataclass(frozen=True)
class SmoothingCheck:
    eps: float
    lhs: float
    smoothed_mu: float
    rhs: float
    stderr: float
    C: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + 3 * self.stderr


def smoothing_lemma_check(samplesX, samplesY, cov, eps_grid, cfg: FamilyConfig = FamilyConfig(),
                          C: float = 2.0, seed: int = 0, threads: int = 1):
    """Compare ``μ(X, Y)`` with ``C μ(X+εZ, Y+εZ) + C ε log(ep)/sqrt(min Σ_ii)``.

    Each sample gets its own standard Gaussian perturbation ``Z``.
    """
    x, y = _as_samples(samplesX), _as_samples(samplesY)
    p = x.shape[1]
    min_var = float(np.min(np.diag(np.atleast_2d(cov))))
    base = estimate_mu(x, y, build_rectangle_family(x, y, cfg), threads=threads)
    zx = rng.draw("gaussian", rng.derive_key(seed, "smooth-zx"), 0, x.shape[0], p, threads)
    zy = rng.draw("gaussian", rng.derive_key(seed, "smooth-zy"), 0, y.shape[0], p, threads)
    out = []
    for eps in eps_grid:
        xs, ys = x + eps * zx, y + eps * zy
        sm = estimate_mu(xs, ys, build_rectangle_family(xs, ys, cfg), threads=threads)
        rhs = C * sm.value + C * eps * (1.0 + math.log(p)) / math.sqrt(min_var)
        se = math.sqrt(base.stderr**2 + (C * sm.stderr) ** 2)
        out.append(SmoothingCheck(float(eps), base.value, sm.value, rhs, se, C))
    return out
