"""Experiment drivers: rate-scaling studies, log-log fits, simulated lemma audits."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import rng
from .bounds import corollary_bound
from .core import MomentParams, ProcessSpec, prefix_sum
from .distance import (FamilyConfig, audit_induction_lemmas, build_rectangle_family,
                       estimate_kappa, estimate_mu)
from .errors import ConfigError, InsufficientDataError
from .gaussian import sample_sum_gaussian
from .params import extract_sigmas, estimate_nu
from .procgen import sample_paths, sample_sums, sample_sums_paired, sum_covariance

log = logging.getLogger(__name__)

DEFAULT_N_GRID = (64, 128, 256, 512, 1024, 2048, 4096)
COUPLINGS = ("paired", "independent")


@dataclass(frozen=True)
class RateConfig:
    spec: ProcessSpec
    n_grid: tuple = DEFAULT_N_GRID
    replicates: int = 10_000
    seed: int = 0
    family: FamilyConfig = field(default_factory=FamilyConfig)
    m: Optional[int] = None
    block: Optional[int] = None
    n_mc: int = 100_000
    C: float = 1.0
    label: str = ""
    coupling: str = "paired"

    def declared_m(self):
        if self.block is not None:
            return int(self.block)
        return int(self.m) if self.m is not None else max(self.spec.m, 1)


def run_rate_experiment(cfg: RateConfig, threads: int = 1, force: bool = False,
                        nu_cache: Optional[dict] = None):
    """Estimate μ(S X_[1,n], S Y_[1,n]) along ``cfg.n_grid``.

    With ``cfg.block`` set, each replicate path is block-averaged with that block
    length before summing, the Gaussian side uses the blocked covariance, and the
    rows are indexed by ``n_eff = n / block``. Rows come back in grid order.

    ``cfg.coupling`` picks how the Gaussian sums are drawn. ``"independent"``
    samples them from ``sum_covariance`` on their own stream. ``"paired"`` (the
    default) drives the Gaussian analog with the same uniforms as the process
    (see :func:`mdclt.procgen.sample_sums_paired`). Both give exactly the same
    two marginal laws; pairing only lowers the noise floor of the estimate.
    """
    spec = cfg.spec
    if cfg.replicates < 1:
        raise ConfigError("rate experiment needs at least one replicate")
    if not cfg.n_grid:
        raise ConfigError("rate experiment needs a non-empty n grid")
    if spec.innovation == "gaussian" and not force:
        raise ConfigError(
            "Gaussian innovations make every partial sum exactly Gaussian, so the "
            "distance is identically 0 and the run carries no rate information; "
            "use non-Gaussian innovations or pass --force")
    if cfg.coupling not in COUPLINGS:
        raise ConfigError(f"coupling must be one of {COUPLINGS}, got {cfg.coupling!r}")
    m = cfg.declared_m()
    key = (spec.digest, cfg.n_mc, cfg.seed)
    if nu_cache is not None and key in nu_cache:
        nu = nu_cache[key]
    else:
        nu = estimate_nu(spec, cfg.n_mc, rng.derive_key(cfg.seed, "rate-nu"), threads)
        if nu_cache is not None:
            nu_cache[key] = nu
    rows = []
    for n in cfg.n_grid:
        n = int(n)
        if cfg.block is not None and n <= cfg.block:
            raise ConfigError(f"n={n} too short for blocks of length {cfg.block}")
        xseed = rng.derive_key(cfg.seed, "rate-x", n)
        if cfg.coupling == "paired":
            sx, sy = sample_sums_paired(spec, n, cfg.replicates, xseed, threads, block=cfg.block)
        else:
            sx = sample_sums(spec, n, cfg.replicates, xseed, threads, block=cfg.block)
            cov = sum_covariance(spec, 1, n)
            if cfg.block is not None:
                cov = cov / cfg.block**2
            sy = sample_sum_gaussian(cov, cfg.replicates, rng.derive_key(cfg.seed, "rate-y", n),
                                     threads)
        fam = build_rectangle_family(sx, sy, cfg.family)
        est = estimate_mu(sx, sy, fam, threads=threads)
        sig = extract_sigmas(spec, n, m)
        params = MomentParams(sig.sigma_min, sig.sigma_lower, sig.sigma_upper, nu.nu1, nu.nu3, n, m)
        bound = corollary_bound(params, n, m, spec.p, cfg.C) if n >= m else float("nan")
        rows.append({
            "label": cfg.label, "n": n, "m": m, "n_eff": n / m, "p": spec.p,
            "blocked": cfg.block is not None, "mu_hat": est.value, "stderr": est.stderr,
            "bound": bound, "C": cfg.C, "n_rect": est.n_rect, "R_x": est.R_x, "R_y": est.R_y,
            "seed": int(cfg.seed), "coupling": cfg.coupling, "spec_digest": spec.digest[:16],
        })
        log.info("n=%d m=%d mu_hat=%.5f stderr=%.5f", n, m, est.value, est.stderr)
    return rows


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    used: tuple
    excluded: tuple

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "used": [list(map(float, u)) for u in self.used],
                "excluded": [list(map(float, e)) for e in self.excluded]}


def fit_loglog_slope(points: Iterable, min_points: int = 3) -> LogLogFit:
    """OLS of ``ln mu`` on ``ln n_eff``.

    ``points`` holds ``(n_eff, mu)`` or ``(n_eff, mu, stderr)`` tuples, or rate
    rows. Points with ``mu <= 2 * stderr`` (or ``mu <= 0``) are excluded.
    """
    used, excluded = [], []
    for pt in points:
        if isinstance(pt, dict):
            pt = (pt["n_eff"], pt["mu_hat"], pt.get("stderr", 0.0))
        x, y = float(pt[0]), float(pt[1])
        se = float(pt[2]) if len(pt) > 2 else 0.0
        if x <= 0:
            raise ConfigError(f"n_eff must be positive, got {x}")
        (used if y > 2 * se and y > 0 else excluded).append(tuple(pt))
    if len(used) < min_points:
        raise InsufficientDataError(
            f"only {len(used)} usable point(s) for the log-log fit (need {min_points}); "
            f"excluded: {excluded}")
    lx = np.log([u[0] for u in used])
    ly = np.log([u[1] for u in used])
    if np.ptp(lx) == 0:
        raise InsufficientDataError("all usable points share the same n_eff")
    xm, ym = lx.mean(), ly.mean()
    slope = float(np.sum((lx - xm) * (ly - ym)) / np.sum((lx - xm) ** 2))
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((ly - intercept - slope * lx) ** 2))
    ss_tot = float(np.sum((ly - ym) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LogLogFit(slope, intercept, r2, tuple(used), tuple(excluded))


def overlay_check(rows_a, rows_b, n_sigma=3.0):
    """Compare two rate curves at their shared ``n_eff`` values.

    Returns ``[(n_eff, mu_a, mu_b, combined_stderr, within), ...]``.
    """
    b = {float(r["n_eff"]): r for r in rows_b}
    out = []
    for r in rows_a:
        other = b.get(float(r["n_eff"]))
        if other is None:
            continue
        se = math.hypot(r["stderr"], other["stderr"])
        diff = abs(r["mu_hat"] - other["mu_hat"])
        out.append((float(r["n_eff"]), r["mu_hat"], other["mu_hat"], se, diff <= n_sigma * se))
    return out


def audit_from_simulation(spec: ProcessSpec, n: int, R: int, seed: int, grid, delta: float,
                          eps: float, family: FamilyConfig = FamilyConfig(), C: float = 1.0,
                          c_delta: float = 1.0, n_mc: int = 100_000, m: Optional[int] = None,
                          threads: int = 1):
    """Run :func:`audit_induction_lemmas` on simulated partial sums.

    κ_i is estimated unconditionally: the band frequency of ``S X_[1,i]`` over
    constant corners, which is a lower-bound proxy for the conditional quantity.
    """
    m = max(spec.m, 1) if m is None else m
    batch = sample_paths(spec, n, R, seed, threads)
    mu_seq = {}
    for i in grid:
        i = int(i)
        sx = prefix_sum(batch, 1, i)
        sy = sample_sum_gaussian(sum_covariance(spec, 1, i), R,
                                 rng.derive_key(seed, "audit-y", i), threads)
        mu_seq[i] = estimate_mu(sx, sy, build_rectangle_family(sx, sy, family), threads=threads)
    cache = {}

    def kappa_fn(i, d):
        if not 1 <= i <= n:
            return None
        if i not in cache:
            sx = prefix_sum(batch, 1, i)
            cache[i] = (sx, build_rectangle_family(sx, None, family))
        sx, fam = cache[i]
        return estimate_kappa(sx, d, fam, threads)

    sig = extract_sigmas(spec, n, m)
    nu = estimate_nu(spec, n_mc, rng.derive_key(seed, "audit-nu"), threads)
    params = MomentParams(sig.sigma_min, sig.sigma_lower, sig.sigma_upper, nu.nu1, nu.nu3, n, m)
    return audit_induction_lemmas(mu_seq, kappa_fn, params, n, spec.p, delta, eps, C, c_delta)


def loglog_svg(series: dict, title: str = "", xlabel: str = "n_eff", ylabel: str = "mu_hat",
               width: int = 640, height: int = 420) -> str:
    """Self-contained SVG of ``{name: [(x, y), ...]}`` on log-log axes."""
    pts = [(x, y) for s in series.values() for x, y in s if x > 0 and y > 0]
    if not pts:
        raise InsufficientDataError("nothing positive to plot")
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    x1, y1 = (x1 + 1e-9 if x1 == x0 else x1), (y1 + 1e-9 if y1 == y0 else y1)
    ml, mr, mt, mb = 70, 20, 40, 50

    def sx(v):
        return ml + (math.log10(v) - x0) / (x1 - x0) * (width - ml - mr)

    def sy(v):
        return height - mb - (math.log10(v) - y0) / (y1 - y0) * (height - mt - mb)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{title}</text>',
           f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel} (log)</text>',
           f'<text x="15" y="{height / 2:.1f}" transform="rotate(-90 15 {height / 2:.1f})" '
           f'text-anchor="middle">{ylabel} (log)</text>']
    for e in range(math.floor(x0), math.ceil(x1) + 1):
        for mant in (1, 2, 5):
            v = mant * 10.0**e
            if x0 <= math.log10(v) <= x1:
                out.append(f'<text x="{sx(v):.1f}" y="{height - mb + 16}" text-anchor="middle">{v:g}</text>')
    for e in range(math.floor(y0), math.ceil(y1) + 1):
        for mant in (1, 2, 5):
            v = mant * 10.0**e
            if y0 <= math.log10(v) <= y1:
                out.append(f'<text x="{ml - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:g}</text>')
    for k, (name, s) in enumerate(series.items()):
        c = colors[k % len(colors)]
        good = [(x, y) for x, y in s if x > 0 and y > 0]
        path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in good)
        out.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        for x, y in good:
            out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{c}"/>')
        out.append(f'<text x="{width - mr - 150}" y="{mt + 16 * k}" fill="{c}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
