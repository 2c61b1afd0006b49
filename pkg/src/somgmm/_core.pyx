# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: per-sample joint log-densities for diagonal mixtures.

This is the inner loop of every loss, gradient and score in the package;
training touches it once per sample per iteration.
"""

import numpy as np

from libc.math cimport log, INFINITY

cdef double HALF_LOG_2PI = 0.9189385332046727417803297364056176398


def log_joints(double[::1] weights, double[:, ::1] centroids,
               double[:, ::1] precision_roots, double[:, ::1] samples):
    """Return the N x K matrix of log(pi_k) + log p_k(x_n)."""
    cdef Py_ssize_t N = samples.shape[0]
    cdef Py_ssize_t K = centroids.shape[0]
    cdef Py_ssize_t D = centroids.shape[1]
    cdef Py_ssize_t n, k, i
    cdef double acc, diff, d

    out_arr = np.empty((N, K), dtype=np.float64)
    const_arr = np.empty(K, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] const = const_arr

    for k in range(K):
        if weights[k] > 0.0:
            acc = log(weights[k])
        else:
            acc = -INFINITY
        for i in range(D):
            acc += log(precision_roots[k, i]) - HALF_LOG_2PI
        const[k] = acc

    for n in range(N):
        for k in range(K):
            acc = 0.0
            for i in range(D):
                d = precision_roots[k, i]
                diff = samples[n, i] - centroids[k, i]
                acc += d * d * diff * diff
            out[n, k] = const[k] - 0.5 * acc

    return out_arr
