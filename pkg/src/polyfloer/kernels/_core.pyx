# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt, fmod, INFINITY

cnp.import_array()


def batched_matvec(blocks, vecs):
    cdef double complex[:, :, ::1] b = np.ascontiguousarray(blocks, dtype=np.complex128)
    cdef double complex[:, ::1] v = np.ascontiguousarray(vecs, dtype=np.complex128)
    cdef Py_ssize_t n = b.shape[0], d = b.shape[1]
    if v.shape[0] != n or v.shape[1] != d or b.shape[2] != d:
        raise ValueError("block and vector shapes disagree")
    out = np.empty((n, d), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t p, i, j
    cdef double complex acc
    with nogil:
        for p in range(n):
            for i in range(d):
                acc = 0
                for j in range(d):
                    acc = acc + b[p, i, j] * v[p, j]
                o[p, i] = acc
    return out


def bump_profile(y, double r, double period):
    arr = np.asarray(y, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1))
    cdef double[::1] yy = flat
    out = np.zeros(flat.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = yy.shape[0]
    cdef double half = 0.5 * period, w, r2 = r * r
    with nogil:
        for i in range(n):
            w = fmod(half - yy[i], period)
            if w < 0:
                w = w + period
            w = half - w
            if fabs(w) < r:
                o[i] = exp(1.0 - r2 / (r2 - w * w))
    return out.reshape(arr.shape)


def gap_sweep(double R, long kmax, mlimit):
    cdef long[::1] lim = np.ascontiguousarray(mlimit, dtype=np.int64)
    cdef double best = INFINITY, val, w, root
    cdef long bm = 0, bk = 0, k, m
    with nogil:
        for k in range(kmax + 1):
            w = 1.0 + <double>k * <double>k
            root = sqrt(w)
            for m in range(lim[k] + 1):
                val = fabs(R * <double>m - root) * (w * w)
                if val < best:
                    best = val
                    bm = m
                    bk = k
    return (best, bm, bk)
