"""Pure numpy versions of the hot loops in ``_kernels.pyx``.

Both backends produce bit-identical output; see ``tests/test_kernels.py``.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def replicate_uniforms(key, r0, nrep, k, threads=1):
    with np.errstate(over="ignore"):
        rows = np.arange(r0, r0 + nrep, dtype=np.uint64)
        kr = _mix64(np.uint64(key) ^ _mix64(rows * GAMMA + GAMMA))
        cols = (np.arange(1, k + 1, dtype=np.uint64) * GAMMA)[None, :]
        w = _mix64(kr[:, None] + cols)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def rect_counts(samples, corners, threads=1):
    x = np.asarray(samples, dtype=np.float64)
    c = np.asarray(corners, dtype=np.float64)
    if c.shape[1] != x.shape[1]:
        raise ValueError("corner dimension mismatch")
    order = np.argsort(x[:, 0], kind="stable")
    xs = np.ascontiguousarray(x[order])
    lim = np.searchsorted(xs[:, 0], c[:, 0], side="right").astype(np.int64)
    if x.shape[1] == 1:
        return lim
    out = np.zeros(c.shape[0], dtype=np.int64)
    rest = xs[:, 1:]

    def work(a):
        head = rest[:lim[a]]
        out[a] = np.count_nonzero((head <= c[a, 1:]).all(axis=1))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, range(c.shape[0])))
    else:
        for a in range(c.shape[0]):
            work(a)
    return out
