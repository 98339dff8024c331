"""m-dependent moving-average processes: construction, sampling, covariances.

The process is extended to negative times, so ``X_1`` already uses
``eps_{1-m} .. eps_1`` and the sequence is strictly stationary.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .core import BlockedSpec, ProcessSpec, SampleBatch, as_matrix_list
from .errors import CapacityError, ConfigError, ParameterError, RangeError, ShapeError

#: default cap on R * n * p for materialized batches (float64 entries, 1 GiB)
MEMORY_CAP = 2**27
#: target float64 entries per sampling chunk
CHUNK_ENTRIES = 2**21

_MAGIC = b"MDCLTBT1"
_HEADER = struct.Struct("<8sQQQQQ32s")


@dataclass(frozen=True)
class CovarianceModel:
    """Lag covariances ``Γ_ℓ = Cov(X_i, X_{i+ℓ})`` for ``ℓ = 0..m``."""

    lag_covs: tuple

    @property
    def m(self):
        return len(self.lag_covs) - 1

    def lag(self, ell):
        """Γ_ℓ for any integer ℓ (``Γ_{-ℓ} = Γ_ℓᵀ``; zero beyond ``m``)."""
        if abs(ell) > self.m:
            return np.zeros_like(self.lag_covs[0])
        g = self.lag_covs[abs(ell)]
        return g if ell >= 0 else g.T


_COV_CACHE: dict = {}


def covariance_model(spec: ProcessSpec) -> CovarianceModel:
    cached = _COV_CACHE.get(spec.digest)
    if cached is not None:
        return cached
    A = spec.coeffs
    covs = []
    for ell in range(spec.m + 1):
        g = np.zeros((spec.p, spec.p))
        for a in range(spec.m + 1 - ell):
            g += A[a] @ A[a + ell].T
        if ell == 0:
            g = 0.5 * (g + g.T)
        g.setflags(write=False)
        covs.append(g)
    model = CovarianceModel(tuple(covs))
    _COV_CACHE[spec.digest] = model
    return model


def make_ma_process(p, m, coeffs, innovation="gaussian", rate=1.0) -> ProcessSpec:
    """Validated :class:`ProcessSpec`; scalar coefficients mean ``c * I``."""
    if len(coeffs) != m + 1:
        raise ShapeError(f"expected m+1={m + 1} coefficient matrices, got {len(coeffs)}")
    spec = ProcessSpec(p=p, m=m, coeffs=tuple(as_matrix_list(coeffs, p)),
                       innovation=innovation, rate=rate)
    covariance_model(spec)
    return spec


def sum_covariance(spec: ProcessSpec, i: int, j: int) -> np.ndarray:
    """Exact ``Var[S X_[i,j]]``.

    ``len*Γ_0 + sum_{ℓ=1}^{min(m, len-1)} (len-ℓ)(Γ_ℓ + Γ_ℓᵀ)`` with
    ``len = j - i + 1``.
    """
    if not (1 <= i <= j):
        raise RangeError(f"need 1 <= i <= j, got i={i}, j={j}")
    return _sum_covariance_len(covariance_model(spec), j - i + 1)


def _sum_covariance_len(model: CovarianceModel, length: int) -> np.ndarray:
    g = model.lag_covs
    out = length * g[0]
    for ell in range(1, min(model.m, length - 1) + 1):
        out = out + (length - ell) * (g[ell] + g[ell].T)
    return 0.5 * (out + out.T)


def _apply(mat, x):
    # x @ mat.T without BLAS so the result cannot depend on BLAS threading
    out = x[..., 0:1] * mat[:, 0]
    for k in range(1, mat.shape[1]):
        out = out + x[..., k:k + 1] * mat[:, k]
    return out


def _filter(spec, eps, n):
    m = spec.m
    x = np.zeros((eps.shape[0], n, spec.p))
    for a, A in enumerate(spec.coeffs):
        if np.any(A != 0):
            x += _apply(A, eps[:, m - a:m - a + n, :])
    return x


def _paths_chunk(spec, key, n, r0, r1):
    p, m = spec.p, spec.m
    eps = rng.draw(spec.innovation, key, r0, r1 - r0, (n + m) * p)
    return _filter(spec, eps.reshape(r1 - r0, n + m, p), n)


def _paired_chunk(spec, key, n, r0, r1):
    p, m = spec.p, spec.m
    u = rng.uniforms(key, r0, r1 - r0, (n + m) * p)
    eps = rng.draw_from_uniforms(spec.innovation, u).reshape(r1 - r0, n + m, p)
    z = rng.gaussian_twin(spec.innovation, u).reshape(r1 - r0, n + m, p)
    return _filter(spec, eps, n), _filter(spec, z, n)


def _chunk_size(n, p, m=0):
    return max(1, CHUNK_ENTRIES // ((n + m) * p))


def innovation_key(master_seed):
    return rng.derive_key(master_seed, "innovations")


def sample_paths(spec: ProcessSpec, n: int, R: int, master_seed: int,
                 threads: int = 1, memory_cap: int = MEMORY_CAP) -> SampleBatch:
    """Draw ``R`` independent replicates of ``X_1..X_n``.

    Replicate ``r`` uses the counter stream ``(innovation_key(seed), r)``, so its
    content does not depend on ``R``, on chunking or on the thread count.
    Innovation ``eps_{t}`` coordinate ``k`` is word ``(t + m - 1) * p + k`` of the
    stream, so paths of different length share their common prefix.
    """
    _check_nr(n, R)
    if R * n * spec.p > memory_cap:
        raise CapacityError(
            f"batch of {R}x{n}x{spec.p} exceeds the memory cap of {memory_cap} entries; "
            "use sample_sums() to stream interval sums instead")
    key = innovation_key(master_seed)
    parts = rng.map_chunks(lambda a, b: _paths_chunk(spec, key, n, a, b), R,
                           _chunk_size(n, spec.p, spec.m), threads)
    return SampleBatch(np.concatenate(parts, axis=0), spec, int(master_seed))


def sample_sums(spec: ProcessSpec, n: int, R: int, master_seed: int, threads: int = 1,
                block: int | None = None) -> np.ndarray:
    """Streamed ``S X_[1,n]`` per replicate (``R x p``), same draws as :func:`sample_paths`.

    With ``block`` set, returns the sum of the block-averaged sequence
    (see :func:`mdclt.blocking.block_average`) instead.
    """
    _check_nr(n, R)
    key = innovation_key(master_seed)
    if block is not None:
        from .blocking import block_average

    def work(a, b):
        x = _paths_chunk(spec, key, n, a, b)
        if block is not None:
            x = block_average(x, block)
        return x.sum(axis=1)

    parts = rng.map_chunks(work, R, _chunk_size(n, spec.p, spec.m), threads)
    return np.concatenate(parts, axis=0)


def sample_sums_paired(spec: ProcessSpec, n: int, R: int, master_seed: int, threads: int = 1,
                       block: int | None = None):
    """``(S X, S Y)`` where ``Y`` is the Gaussian analog driven by the same uniforms.

    ``S X`` is identical to :func:`sample_sums`. ``Y`` replaces every innovation
    by a standard normal comonotone with it, so ``S Y ~ N(0, sum_covariance)``
    exactly while being strongly correlated with ``S X``. The rectangle
    distance only depends on the two marginal laws; the coupling just lowers
    the Monte Carlo noise of every CDF difference.
    """
    _check_nr(n, R)
    key = innovation_key(master_seed)
    if block is not None:
        from .blocking import block_average

    def work(a, b):
        x, y = _paired_chunk(spec, key, n, a, b)
        if block is not None:
            x, y = block_average(x, block), block_average(y, block)
        return x.sum(axis=1), y.sum(axis=1)

    parts = rng.map_chunks(work, R, _chunk_size(n, spec.p, spec.m) // 2 or 1, threads)
    return (np.concatenate([q[0] for q in parts], axis=0),
            np.concatenate([q[1] for q in parts], axis=0))


def _check_nr(n, R):
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if int(R) != R or R < 1:
        raise ParameterError(f"R must be >= 1, got {R}")


def save_batch(batch: SampleBatch, path) -> Path:
    """Write the binary container plus a JSON sidecar (``<path>.json``).

    Layout: 8-byte magic, little-endian uint64 ``p, m, n, R, master_seed``,
    32-byte SHA-256 of the process description JSON, then ``R*n*p`` little-endian float64 in
    replicate-major (C) order.
    """
    path = Path(path)
    spec = batch.spec
    digest = bytes.fromhex(spec.digest)
    header = _HEADER.pack(_MAGIC, batch.p, spec.m, batch.n, batch.R,
                          int(batch.master_seed) & rng.MASK64, digest)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(batch.data, dtype="<f8").tobytes())
    sidecar = {"spec": spec.to_dict(), "digest": spec.digest, "p": batch.p, "m": spec.m,
               "n": batch.n, "R": batch.R, "master_seed": int(batch.master_seed)}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def load_batch(path) -> SampleBatch:
    """Read a container written by :func:`save_batch` and check it against its sidecar."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) < _HEADER.size or head[:8] != _MAGIC:
                raise ShapeError(f"{path} is not a batch container")
            magic, p, m, n, R, seed, digest = _HEADER.unpack(head)
            data = np.frombuffer(fh.read(), dtype="<f8")
        sidecar = json.loads(Path(str(path) + ".json").read_text())
    except ShapeError:
        raise
    except OSError as exc:
        raise ConfigError(f"cannot read batch {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"corrupt sidecar for {path}: {exc}") from exc
    if data.size != R * n * p:
        raise ShapeError(f"{path}: expected {R * n * p} values, found {data.size}")
    spec_d = sidecar["spec"]
    if "blocked" in spec_d:
        b = spec_d["blocked"]
        spec = BlockedSpec(ProcessSpec.from_dict(b["base"]), int(b["block"]),
                           int(b["n_orig"]), b.get("remainder", "absorb"))
    else:
        spec = ProcessSpec.from_dict(spec_d)
    if spec.digest != digest.hex():
        raise ShapeError(f"{path}: spec digest in header does not match the sidecar")
    return SampleBatch(data.reshape(R, n, p).astype(np.float64), spec, seed)
