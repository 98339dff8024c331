# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. ``_kernels_py`` is the reference; outputs are bit-identical."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def replicate_uniforms(uint64_t key, Py_ssize_t r0, Py_ssize_t nrep, Py_ssize_t k, int threads=1):
    out = np.empty((nrep, k), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef uint64_t kr, w
    for i in prange(nrep, nogil=True, num_threads=max(threads, 1), schedule="static"):
        kr = _mix64(key ^ _mix64(<uint64_t>(r0 + i) * GAMMA + GAMMA))
        for j in range(k):
            w = _mix64(kr + <uint64_t>(j + 1) * GAMMA)
            o[i, j] = (<double>(w >> 11) + 0.5) * TWO_M53
    return out


def rect_counts(samples, corners, int threads=1):
    """Number of rows of ``samples`` lying coordinate-wise below each corner."""
    xin = np.asarray(samples, dtype=np.float64)
    cin = np.asarray(corners, dtype=np.float64)
    if cin.shape[1] != xin.shape[1]:
        raise ValueError("corner dimension mismatch")
    # rows sorted on the first coordinate: only a prefix can lie below a corner
    order = np.argsort(xin[:, 0], kind="stable")
    xs = np.ascontiguousarray(xin[order])
    lim = np.searchsorted(xs[:, 0], cin[:, 0], side="right").astype(np.int64)
    if xin.shape[1] == 1:
        return lim
    cdef double[:, ::1] x = xs
    cdef double[:, ::1] c = np.ascontiguousarray(cin)
    cdef int64_t[::1] limv = lim
    cdef Py_ssize_t p = x.shape[1], M = c.shape[0]
    out = np.zeros(M, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t a, b, k
    cdef int64_t cnt
    cdef bint inside
    for a in prange(M, nogil=True, num_threads=max(threads, 1), schedule="dynamic"):
        cnt = 0
        for b in range(limv[a]):
            inside = True
            for k in range(1, p):
                if x[b, k] > c[a, k]:
                    inside = False
                    break
            if inside:
                cnt = cnt + 1
        o[a] = cnt
    return out
