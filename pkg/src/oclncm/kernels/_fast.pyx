# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: sequential running-mean updates and batched squared distances."""

import numpy as np

BACKEND = "cython"


def mean_update_chunk(double[:, ::1] means, long long[::1] counts,
                      double[:, ::1] vecs, long long[::1] rows):
    cdef Py_ssize_t i, f, r
    cdef Py_ssize_t nrec = vecs.shape[0]
    cdef Py_ssize_t dim = vecs.shape[1]
    cdef double a, b
    cdef long long n
    for i in range(nrec):
        r = rows[i]
        n = counts[r]
        a = n / (n + 1.0)
        b = 1.0 / (n + 1.0)
        for f in range(dim):
            means[r, f] = a * means[r, f] + b * vecs[i, f]
        counts[r] = n + 1


def sq_dist_chunk(double[:, ::1] queries, double[:, ::1] means, out=None):
    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t dim = queries.shape[1]
    cdef Py_ssize_t nc = means.shape[0]
    if out is None:
        out = np.empty((nq, nc), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef Py_ssize_t q, c, f
    cdef double acc, d
    for q in range(nq):
        for c in range(nc):
            acc = 0.0
            for f in range(dim):
                d = queries[q, f] - means[c, f]
                acc += d * d
            res[q, c] = acc
    return out
