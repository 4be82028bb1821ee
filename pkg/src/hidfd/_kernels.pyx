# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense kernels.

Every reduction runs left to right in a fixed order, so results do not
depend on BLAS threading.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def matmul(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef Py_ssize_t i, j, p
    cdef double aip
    if b.shape[0] != k:
        raise ValueError(f"matmul: inner dimensions {k} and {b.shape[0]} differ")
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] c = out
    for i in range(m):
        for p in range(k):
            aip = a[i, p]
            for j in range(n):
                c[i, j] += aip * b[p, j]
    return out


def log_softmax(const double[:, ::1] a):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t i, j
    cdef double mx, s, lse
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(m):
        mx = a[i, 0]
        for j in range(1, n):
            if a[i, j] > mx:
                mx = a[i, j]
        s = 0.0
        for j in range(n):
            s += exp(a[i, j] - mx)
        lse = mx + log(s)
        for j in range(n):
            o[i, j] = a[i, j] - lse
    return out


def row_sqdist(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, d
    if b.shape[0] != m or b.shape[1] != n:
        raise ValueError("row_sqdist: operand shapes differ")
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(m):
        s = 0.0
        for j in range(n):
            d = a[i, j] - b[i, j]
            s += d * d
        o[i] = s
    return out
