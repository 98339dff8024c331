"""Counter-based random streams.

Every draw is a pure function of ``(key, replicate, index)``:

* a stream key is derived from a master seed and a tuple of labels by
  chaining the SplitMix64 finalizer (:func:`derive_key`);
* replicate ``r`` of a stream owns the SplitMix64 sequence seeded with
  ``mix64(key ^ mix64((r + 1) * GAMMA))``; its ``j``-th 64-bit word is
  ``mix64(k_r + (j + 1) * GAMMA)``;
* a word becomes a uniform on the open interval (0, 1) as
  ``((w >> 11) + 0.5) * 2**-53``.

Because nothing depends on generation order, any partition of the replicates
into chunks or threads gives the same numbers. This derivation is part of the
on-disk reproducibility contract; changing it invalidates stored batches.
"""
import hashlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import ndtri

from . import kernels

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _label_int(label):
    if isinstance(label, (int, np.integer)):
        return int(label) & MASK64
    digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_key(seed, *labels):
    """Derive a 64-bit stream key from ``seed`` and any number of labels."""
    k = mix64(int(seed) & MASK64)
    for label in labels:
        k = mix64(k ^ mix64(_label_int(label) + GAMMA))
    return k


def uniforms(key, r0, nrep, k, threads=1):
    """``(nrep, k)`` uniforms for replicates ``r0 .. r0 + nrep - 1``."""
    return kernels.replicate_uniforms(int(key), int(r0), int(nrep), int(k), int(threads))


def draw(law, key, r0, nrep, k, threads=1):
    """Unit-variance centered draws of the given innovation law."""
    return draw_from_uniforms(law, uniforms(key, r0, nrep, k, threads))


def draw_from_uniforms(law, u):
    if law == "gaussian":
        return ndtri(u)
    if law == "rademacher":
        return np.where(u < 0.5, -1.0, 1.0)
    if law == "exponential":
        return -np.log(u) - 1.0
    raise ValueError(f"unknown innovation law {law!r}")


def gaussian_twin(law, u):
    """Standard normals comonotone with ``draw(law, ...)`` on the same uniforms.

    Rademacher draws are increasing in ``u`` and centered exponentials are
    decreasing, so the twin is ``ndtri(u)`` or ``-ndtri(u)`` respectively.
    """
    z = ndtri(u)
    return -z if law == "exponential" else z


def chunk_bounds(total, chunk):
    return [(s, min(total, s + chunk)) for s in range(0, total, chunk)]


def map_chunks(fn, total, chunk, threads=1):
    """Apply ``fn(start, stop)`` over replicate chunks; results in chunk order."""
    bounds = chunk_bounds(total, max(1, int(chunk)))
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda b: fn(*b), bounds))
    return [fn(*b) for b in bounds]
