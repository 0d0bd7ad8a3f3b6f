# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; signatures and results match ``_kernels_py``."""

import os

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp

cnp.import_array()


def diag_recurrence(decay, drive, z0):
    cdef const double[:, ::1] a = np.ascontiguousarray(decay, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(drive, dtype=np.float64)
    cdef Py_ssize_t nsteps = a.shape[0], m = a.shape[1], j, k
    out_arr = np.empty((nsteps + 1, m))
    cdef double[:, ::1] out = out_arr
    cdef const double[::1] z = np.ascontiguousarray(z0, dtype=np.float64)
    for k in range(m):
        out[0, k] = z[k]
    for j in range(nsteps):
        for k in range(m):
            out[j + 1, k] = a[j, k] * out[j, k] + b[j, k]
    return out_arr


def _threads():
    raw = os.environ.get("BURGERS_RELAX_THREADS", "")
    return max(1, int(raw)) if raw.isdigit() else max(1, os.cpu_count() or 1)


def hereditary_sum(times, lam, rates):
    cdef const double[::1] t = np.ascontiguousarray(times, dtype=np.float64)
    cdef const double[::1] lm = np.ascontiguousarray(lam, dtype=np.float64)
    cdef const double[:, ::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    cdef Py_ssize_t n = t.shape[0], m = lm.shape[0], i, j, k
    out_arr = np.zeros((n, m))
    cdef double[:, ::1] out = out_arr
    cdef double acc, tj, prev, nxt
    cdef int nt = _threads()
    # rows are independent, so the result does not depend on the thread count
    for j in prange(1, n, nogil=True, num_threads=nt, schedule="dynamic"):
        tj = t[j]
        for k in range(m):
            acc = 0.0
            prev = exp(lm[k] * (tj - t[0]))
            for i in range(j):
                nxt = exp(lm[k] * (tj - t[i + 1]))
                acc = acc + r[i, k] * (prev - nxt)
                prev = nxt
            out[j, k] = acc / lm[k]
    return out_arr


def grouped_matvec(group, mats, vecs):
    cdef const Py_ssize_t[::1] g = np.ascontiguousarray(group, dtype=np.intp)
    cdef const double[:, :, ::1] a = np.ascontiguousarray(mats, dtype=np.float64)
    cdef const double[:, ::1] v = np.ascontiguousarray(vecs, dtype=np.float64)
    cdef Py_ssize_t ne = v.shape[0], p = v.shape[1], e, row, col, gi
    out_arr = np.empty((ne, p))
    cdef double[:, ::1] out = out_arr
    cdef double acc
    for e in range(ne):
        gi = g[e]
        for row in range(p):
            acc = 0.0
            for col in range(p):
                acc += a[gi, row, col] * v[e, col]
            out[e, row] = acc
    return out_arr
