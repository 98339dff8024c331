"""Domain types, the interval-sum operator and rectangle/band geometry.

Index convention: intervals are closed and 1-based, ``[i, j]`` meaning
``X_i + ... + X_j`` with ``1 <= i <= j <= n``. A half-open ``[i, j)`` query is
``prefix_sum(batch, i, j - 1)``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DegeneracyError, ParameterError, RangeError, ShapeError

INNOVATIONS = ("gaussian", "rademacher", "exponential")


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProcessSpec:
    """Moving-average process ``X_i = sum_a A_a eps_{i-a}``, ``a = 0..m``.

    ``eps`` has i.i.d. coordinates with mean 0 and variance 1 drawn from
    ``innovation``. ``rate`` only matters for bookkeeping: a centered
    exponential is rescaled to unit variance, which removes the rate.
    """

    p: int
    m: int
    coeffs: tuple
    innovation: str = "gaussian"
    rate: float = 1.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ParameterError(f"p must be a positive integer, got {self.p}")
        if int(self.m) != self.m or self.m < 0:
            raise ParameterError(f"m must be a non-negative integer, got {self.m}")
        if self.innovation not in INNOVATIONS:
            raise ParameterError(
                f"innovation must be one of {INNOVATIONS}, got {self.innovation!r}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ParameterError("exponential rate must be positive")
        coeffs = tuple(_frozen(a) for a in self.coeffs)
        if len(coeffs) != self.m + 1:
            raise ShapeError(f"expected {self.m + 1} coefficient matrices, got {len(coeffs)}")
        for a in coeffs:
            if a.shape != (self.p, self.p):
                raise ShapeError(f"coefficient matrix of shape {a.shape}, expected {(self.p, self.p)}")
            if not np.all(np.isfinite(a)):
                raise ParameterError("coefficient matrices must be finite")
        if not any(np.any(a != 0) for a in coeffs):
            raise DegeneracyError("all coefficient matrices are zero")
        object.__setattr__(self, "coeffs", coeffs)

    def to_dict(self):
        return {
            "p": int(self.p),
            "m": int(self.m),
            "coeffs": [a.tolist() for a in self.coeffs],
            "innovation": self.innovation,
            "rate": float(self.rate),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(p=int(d["p"]), m=int(d["m"]), coeffs=tuple(np.asarray(c) for c in d["coeffs"]),
                   innovation=d.get("innovation", "gaussian"), rate=float(d.get("rate", 1.0)))

    @cached_property
    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, ProcessSpec) and self.digest == other.digest

    def __hash__(self):
        return hash(self.digest)


@dataclass(frozen=True, eq=False)
class BlockedSpec:
    """Marker for a batch produced by block averaging; it has no MA form."""

    base: ProcessSpec
    block: int
    n_orig: int
    remainder: str = "absorb"

    @property
    def p(self):
        return self.base.p

    @property
    def m(self):
        return 1

    def to_dict(self):
        return {"blocked": {"base": self.base.to_dict(), "block": self.block,
                            "n_orig": self.n_orig, "remainder": self.remainder}}

    @cached_property
    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """``R`` independent replicates of ``X_1..X_n``; ``data`` is ``R x n x p``."""

    data: np.ndarray
    spec: object
    master_seed: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ShapeError(f"batch data must be R x n x p, got shape {data.shape}")
        if data.flags.writeable:
            data = data.copy() if not data.flags.owndata else data
            data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def R(self):
        return self.data.shape[0]

    @property
    def n(self):
        return self.data.shape[1]

    @property
    def p(self):
        return self.data.shape[2]

    @cached_property
    def prefix_table(self):
        """Compensated running sums ``(hi, lo)``, each ``R x (n+1) x p``.

        ``hi[:, k] + lo[:, k]`` carries ``X_1 + ... + X_k`` with a rounding error
        that does not grow with ``k`` (Neumaier summation).
        """
        R, n, p = self.data.shape
        hi = np.zeros((R, n + 1, p))
        lo = np.zeros((R, n + 1, p))
        s = np.zeros((R, p))
        c = np.zeros((R, p))
        for k in range(n):
            x = self.data[:, k, :]
            t = s + x
            big = np.abs(s) >= np.abs(x)
            c += np.where(big, (s - t) + x, (x - t) + s)
            s = t
            hi[:, k + 1] = s
            lo[:, k + 1] = c
        hi.setflags(write=False)
        lo.setflags(write=False)
        return hi, lo


def prefix_sum(batch: SampleBatch, i: int, j: int) -> np.ndarray:
    """``S X_[i,j]`` for every replicate, as an ``R x p`` array."""
    if not (1 <= i <= j <= batch.n):
        raise RangeError(f"need 1 <= i <= j <= n={batch.n}, got i={i}, j={j}")
    hi, lo = batch.prefix_table
    return (hi[:, j] - hi[:, i - 1]) + (lo[:, j] - lo[:, i - 1])


@dataclass(frozen=True)
class Rectangle:
    corner: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "corner", _frozen(np.atleast_1d(self.corner)))
        if not self.delta >= 0:
            raise ParameterError(f"band half-width must be >= 0, got {self.delta}")

    def contains(self, x):
        """``x`` lies coordinate-wise below the corner (x ⪯ r)."""
        return np.all(np.asarray(x) <= self.corner, axis=-1)


def band_membership(x, rect: Rectangle):
    """True iff ``x ⪯ r + δ1`` and not ``x ⪯ r - δ1``.

    ``x`` may be a single p-vector or an ``N x p`` array.
    """
    x = np.asarray(x, dtype=np.float64)
    r = rect.corner
    if x.shape[-1] != r.shape[0]:
        raise ShapeError(f"point has dimension {x.shape[-1]}, rectangle has {r.shape[0]}")
    outer = np.all(x <= r + rect.delta, axis=-1)
    inner = np.all(x <= r - rect.delta, axis=-1)
    return outer & ~inner


@dataclass(frozen=True)
class MomentParams:
    """Assumption constants together with the ``(n, m)`` used to extract them."""

    sigma_min: float
    sigma_lower: float
    sigma_upper: float
    nu1: float
    nu3: float
    n: Optional[int] = None
    m: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("sigma_min", "sigma_lower", "sigma_upper", "nu1", "nu3"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be finite and positive, got {v!r}")

    def violations(self, rtol=1e-12):
        """Ordering relations that fail (empty for a consistent extraction)."""
        out = []
        if self.sigma_lower > self.sigma_min * (1 + rtol):
            out.append("sigma_lower > sigma_min")
        if self.sigma_min > self.sigma_upper * (1 + rtol):
            out.append("sigma_min > sigma_upper")
        if self.nu1 > self.nu3 ** (1 / 3) * (1 + rtol):
            out.append("nu1 > nu3^(1/3)")
        return out

    def to_dict(self):
        return {"sigma_min": float(self.sigma_min), "sigma_lower": float(self.sigma_lower),
                "sigma_upper": float(self.sigma_upper), "nu1": float(self.nu1),
                "nu3": float(self.nu3), "n": self.n, "m": self.m, "meta": dict(self.meta)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(sigma_min=float(d["sigma_min"]), sigma_lower=float(d["sigma_lower"]),
                   sigma_upper=float(d["sigma_upper"]), nu1=float(d["nu1"]), nu3=float(d["nu3"]),
                   n=d.get("n"), m=d.get("m"), meta=dict(d.get("meta", {})))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    stderr: float
    n_rect: int
    R_x: int
    R_y: int
    kind: str

    def __post_init__(self):
        if self.kind not in ("mu", "kappa"):
            raise ParameterError(f"kind must be 'mu' or 'kappa', got {self.kind!r}")
        if not (0.0 <= self.value <= 1.0):
            raise ParameterError(f"distance estimate outside [0, 1]: {self.value}")
        if not self.stderr >= 0:
            raise ParameterError("stderr must be non-negative")

    def to_row(self, **extra):
        row = {"kind": self.kind, "value": float(self.value), "stderr": float(self.stderr),
               "n_rect": int(self.n_rect), "R_x": int(self.R_x), "R_y": int(self.R_y)}
        row.update(extra)
        return row


def as_matrix_list(coeffs: Sequence, p: int):
    """Accept scalars (meaning ``c * I``) or ``p x p`` nested lists."""
    out = []
    for c in coeffs:
        a = np.asarray(c, dtype=np.float64)
        if a.ndim == 0:
            a = a * np.eye(p)
        out.append(a)
    return out
