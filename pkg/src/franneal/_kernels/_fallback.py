"""Pure-numpy versions of the hot kernels; used when the extension is absent."""

from __future__ import annotations

import numpy as np


def causal_convolve(kernel: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y[m] = sum_{i<=m} kernel[i] * x[m-i]."""
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if kernel.shape != x.shape:
        raise ValueError("kernel and signal lengths differ")
    n = kernel.shape[0]
    return np.convolve(kernel, x)[:n]


def linear_recursion(propagator: np.ndarray, db: np.ndarray, scale: float) -> np.ndarray:
    """u[n+1] = propagator @ u[n] + scale * db[n], u[0] = 0; full trajectory."""
    propagator = np.asarray(propagator, dtype=np.float64)
    db = np.asarray(db, dtype=np.float64)
    n_steps, d = db.shape
    if propagator.shape != (d, d):
        raise ValueError("propagator shape does not match increment dimension")
    out = np.zeros((n_steps + 1, d))
    for n in range(n_steps):
        out[n + 1] = propagator @ out[n] + scale * db[n]
    return out
