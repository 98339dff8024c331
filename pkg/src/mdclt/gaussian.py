"""Covariance-matched Gaussian analog, Gaussian anti-concentration, smoothed CDF."""
import math

import numpy as np
from scipy.special import erfc

from . import rng
from .errors import DegeneracyError, ParameterError, ShapeError

SQRT2 = math.sqrt(2.0)
PHI_MAX = 1.0 / math.sqrt(2.0 * math.pi)


def std_normal_cdf(x):
    """Φ(x) = erfc(-x/√2)/2, accurate in both tails."""
    return 0.5 * erfc(-np.asarray(x, dtype=np.float64) / SQRT2)


def psd_factor(cov, tol=1e-10):
    """Return ``L`` with ``L Lᵀ = cov`` (negative eigenvalues clipped at 0).

    Raises :class:`ShapeError` for a non-symmetric matrix and
    :class:`DegeneracyError` for eigenvalues below ``-tol * trace``.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ShapeError(f"covariance must be square, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise DegeneracyError("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.max(np.abs(cov - cov.T)) > tol * scale:
        raise ShapeError("covariance is not symmetric")
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    if w.min() < -tol * abs(float(np.trace(cov))):
        raise DegeneracyError(f"covariance is indefinite (smallest eigenvalue {w.min():.3e})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_sum_gaussian(cov, R, seed, threads=1):
    """``R x p`` draws of ``N(0, cov)``.

    Replicate ``r`` takes its ``p`` standard normals from counter stream
    ``(derive_key(seed, "gaussian-sum"), r)``.
    """
    if int(R) != R or R < 1:
        raise ParameterError(f"R must be >= 1, got {R}")
    L = psd_factor(cov)
    p = L.shape[0]
    key = rng.derive_key(seed, "gaussian-sum")

    def work(a, b):
        z = rng.draw("gaussian", key, a, b - a, p)
        y = z[:, 0:1] * L[:, 0]
        for k in range(1, p):
            y = y + z[:, k:k + 1] * L[:, k]
        return y

    return np.concatenate(rng.map_chunks(work, int(R), max(1, 2**20 // p), threads), axis=0)


def nazarov_bound(delta, min_marginal_var, p, C=1.0):
    """``C δ sqrt(log(e p) / min_i Σ_ii)``: anti-concentration of a Gaussian band."""
    if not min_marginal_var > 0:
        raise DegeneracyError(f"minimum marginal variance must be positive, got {min_marginal_var}")
    if delta < 0:
        raise ParameterError("delta must be >= 0")
    if p < 1 or C <= 0:
        raise ParameterError("need p >= 1 and C > 0")
    return C * delta * math.sqrt((1.0 + math.log(p)) / min_marginal_var)


def phi_smoothed(x, r, eps):
    """``P[x + eps Z ⪯ r] = prod_k Φ((r_k - x_k)/eps)`` for standard Gaussian ``Z``.

    ``x`` may be a single point or an ``N x p`` array.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if x.shape[-1] != r.shape[-1]:
        raise ShapeError("x and r have different dimensions")
    return np.prod(std_normal_cdf((r - x) / eps), axis=-1)
