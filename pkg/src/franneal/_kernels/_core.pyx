# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: causal convolution and the linear one-step recursion."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def causal_convolve(double[::1] kernel, double[::1] x):
    """y[m] = sum_{i<=m} kernel[i] * x[m-i].

    Accumulated kernel-major: pass i adds kernel[i] * x[.] to the tail of y,
    which keeps the inner loop contiguous and vectorizable while the per-
    element summation order stays fixed.
    """
    cdef Py_ssize_t n = kernel.shape[0]
    if x.shape[0] != n:
        raise ValueError("kernel and signal lengths differ")
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef Py_ssize_t m, i
    cdef double k
    for i in range(n):
        k = kernel[i]
        for m in range(n - i):
            y[m + i] += k * x[m]
    return out


def linear_recursion(double[:, ::1] propagator, double[:, ::1] db, double scale):
    """u[n+1] = propagator @ u[n] + scale * db[n], u[0] = 0.

    Returns the full (N+1, d) trajectory.
    """
    cdef Py_ssize_t n_steps = db.shape[0]
    cdef Py_ssize_t d = db.shape[1]
    if propagator.shape[0] != d or propagator.shape[1] != d:
        raise ValueError("propagator shape does not match increment dimension")
    out = np.zeros((n_steps + 1, d), dtype=np.float64)
    cdef double[:, ::1] u = out
    cdef Py_ssize_t n, i, j
    cdef double acc
    for n in range(n_steps):
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += propagator[i, j] * u[n, j]
            u[n + 1, i] = acc + scale * db[n, i]
    return out
