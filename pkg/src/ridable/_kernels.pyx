# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled log-cosh kernels for the smoothed-l1 sparsity objective.

``Yt`` is the data matrix stored transposed and C-contiguous, one data column
per row, so the inner products ``q . y_k`` stream through memory. Points are
processed in chunks: one pass forms the scaled inner products, a second
branch-free pass over the chunk lets the compiler use vector ``exp``,
``log1p`` and ``tanh``.
"""
import numpy as np

from libc.math cimport exp, fabs, log1p, tanh
from libc.stdlib cimport free, malloc

cdef double LOG2 = 0.6931471805599453
cdef Py_ssize_t CHUNK = 2048


cdef void _inner_products(const double[::1] q, const double[:, ::1] Yt, Py_ssize_t start,
                          Py_ssize_t stop, double inv_mu, double* s) noexcept nogil:
    cdef Py_ssize_t k, i, n = q.shape[0]
    cdef double t
    for k in range(start, stop):
        t = 0.0
        for i in range(n):
            t = t + q[i] * Yt[k, i]
        s[k - start] = t * inv_mu


cdef double _logcosh_sum(const double* s, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0, a
    for k in range(m):
        a = fabs(s[k])
        acc += a + log1p(exp(-2.0 * a))
    return acc - m * LOG2


def logcosh_mean(const double[:, ::1] Q, const double[:, ::1] Yt, double mu):
    """mu * mean_k logcosh(q . y_k / mu) for every row q of Q."""
    cdef Py_ssize_t G = Q.shape[0], n = Q.shape[1], p = Yt.shape[0]
    cdef Py_ssize_t g, start, stop
    cdef double acc, inv_mu = 1.0 / mu
    if Yt.shape[1] != n:
        raise ValueError("dimension mismatch between points and data")
    out = np.empty(G)
    cdef double[::1] o = out
    cdef double* s = <double*> malloc(CHUNK * sizeof(double))
    if s == NULL:
        raise MemoryError()
    try:
        with nogil:
            for g in range(G):
                acc = 0.0
                start = 0
                while start < p:
                    stop = min(start + CHUNK, p)
                    _inner_products(Q[g], Yt, start, stop, inv_mu, s)
                    acc += _logcosh_sum(s, stop - start)
                    start = stop
                o[g] = mu * acc / p
    finally:
        free(s)
    return out


def logcosh_derivatives(const double[::1] q, const double[:, ::1] Yt, double mu):
    """Value, gradient and dense Hessian of the log-cosh mean at ``q``."""
    cdef Py_ssize_t n = q.shape[0], p = Yt.shape[0]
    cdef Py_ssize_t k, i, j, start, stop, m
    cdef double acc = 0.0, t, gacc, inv_mu = 1.0 / mu
    if Yt.shape[1] != n:
        raise ValueError("dimension mismatch between point and data")
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    cdef double[::1] gr = grad
    cdef double[:, ::1] H = hess
    # s | tanh(s) | sech^2(s) | chunk of Y stored column by column
    cdef double* buf = <double*> malloc((3 + n) * CHUNK * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* s = buf
    cdef double* th = buf + CHUNK
    cdef double* w = buf + 2 * CHUNK
    cdef double* cols = buf + 3 * CHUNK
    cdef double* ci
    cdef double* cj
    try:
        with nogil:
            start = 0
            while start < p:
                stop = min(start + CHUNK, p)
                m = stop - start
                _inner_products(q, Yt, start, stop, inv_mu, s)
                acc += _logcosh_sum(s, m)
                for k in range(m):
                    th[k] = tanh(s[k])
                    w[k] = 1.0 - th[k] * th[k]
                for k in range(m):
                    for i in range(n):
                        cols[i * CHUNK + k] = Yt[start + k, i]
                for i in range(n):
                    ci = cols + i * CHUNK
                    gacc = 0.0
                    for k in range(m):
                        gacc += th[k] * ci[k]
                    gr[i] += gacc
                    for j in range(i, n):
                        cj = cols + j * CHUNK
                        t = 0.0
                        for k in range(m):
                            t += w[k] * ci[k] * cj[k]
                        H[i, j] += t
                start = stop
            for i in range(n):
                gr[i] = gr[i] / p
                for j in range(i, n):
                    H[i, j] = H[i, j] * inv_mu / p
                    H[j, i] = H[i, j]
    finally:
        free(buf)
    return mu * acc / p, grad, hess
