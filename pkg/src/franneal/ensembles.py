"""Batched replicate machinery for Monte Carlo runs.

Replicate r always uses the Philox stream (master_seed, r), so a single
replicate regenerated through sample_wiener(..., stream=r) is bit-identical
to row r of the ensemble.  Ensemble-wide fractional paths are computed by
FFT convolution along the replicate axis (the per-path compiled kernel is
the better tool for one long path; FFT wins for many moderate paths).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .fbm import HurstParam, TimeGrid, rng_stream

__all__ = [
    "WienerEnsemble",
    "wiener_ensemble",
    "fbm_ensemble",
    "fbm_endpoints",
    "linear_solution_ensemble",
]


@dataclass(frozen=True)
class WienerEnsemble:
    grid: TimeGrid
    dims: int
    master_seed: int
    increments: np.ndarray  # (replicates, n_steps, dims)

    @property
    def replicates(self) -> int:
        return self.increments.shape[0]


def _draw_block(grid: TimeGrid, dims: int, master_seed: int, lo: int, hi: int) -> np.ndarray:
    sd = math.sqrt(grid.dt)
    out = np.empty((hi - lo, grid.n_steps, dims))
    for r in range(lo, hi):
        out[r - lo] = rng_stream(master_seed, r).standard_normal((grid.n_steps, dims)) * sd
    return out


def wiener_ensemble(
    grid: TimeGrid, dims: int, master_seed: int, replicates: int, threads: int = 1
) -> WienerEnsemble:
    """Draw all replicate Wiener paths; blocks may be generated in parallel
    but are always assembled in replicate order."""
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    if threads <= 1 or replicates < 64:
        inc = _draw_block(grid, dims, master_seed, 0, replicates)
    else:
        block = max(64, replicates // (4 * threads))
        bounds = [(lo, min(lo + block, replicates)) for lo in range(0, replicates, block)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(lambda b: _draw_block(grid, dims, master_seed, *b), bounds)
            )
        inc = np.concatenate(parts, axis=0)
    return WienerEnsemble(grid=grid, dims=dims, master_seed=master_seed, increments=inc)


def fbm_ensemble(
    w: WienerEnsemble, hurst: HurstParam, epsilon: float, dim_index: int = 0
) -> np.ndarray:
    """Fractional path values (replicates, n_steps + 1) for one dimension."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    dw = w.increments[:, :, dim_index]
    n = w.grid.n_steps
    values = np.zeros((w.replicates, n + 1))
    if hurst.alpha == 0.0:
        values[:, 1:] = np.cumsum(dw, axis=1)
    else:
        kernel = (np.arange(1, n + 1) * w.grid.dt + epsilon) ** hurst.alpha
        values[:, 1:] = fftconvolve(dw, kernel[None, :], axes=1)[:, :n]
    return values


def fbm_endpoints(
    grid: TimeGrid,
    hurst: HurstParam,
    epsilons,
    master_seed: int,
    replicates: int,
    node: int | None = None,
    chunk: int = 2048,
) -> np.ndarray:
    """Endpoint values B_{t_node} for many replicates and several epsilons at
    once, without materializing full paths: (replicates, len(epsilons)).

    Streams the Wiener draws in chunks, so 10^5 replicates stay cheap in
    memory.  Coupled across epsilons: one Wiener draw per replicate.  The
    full step count is drawn and truncated, so endpoints match dims=1
    full-path runs under the same (seed, stream) pairs.
    """
    node = grid.n_steps if node is None else node
    eps = np.asarray(list(epsilons), dtype=float)
    if np.any(eps < 0.0):
        raise ValueError("epsilons must be nonnegative")
    lags = np.arange(node, 0, -1) * grid.dt  # kernel for increment i at lag node-i
    kernels = (lags[:, None] + eps[None, :]) ** hurst.alpha  # (node, n_eps)
    sd = math.sqrt(grid.dt)
    out = np.empty((replicates, eps.size))
    for lo in range(0, replicates, chunk):
        hi = min(lo + chunk, replicates)
        dw = np.empty((hi - lo, node))
        for r in range(lo, hi):
            dw[r - lo] = rng_stream(master_seed, r).standard_normal(grid.n_steps)[:node] * sd
        out[lo:hi] = dw @ kernels
    return out


def linear_solution_ensemble(
    propagator: np.ndarray, db: np.ndarray, scale: float
) -> np.ndarray:
    """Batched recursion u[:, n+1] = u[:, n] @ E^T + scale * db[:, n].

    db has shape (replicates, n_steps, d); returns (replicates, n_steps+1, d).
    """
    reps, n_steps, d = db.shape
    out = np.zeros((reps, n_steps + 1, d))
    Et = np.asarray(propagator, dtype=float).T
    for n in range(n_steps):
        out[:, n + 1] = out[:, n] @ Et + scale * db[:, n]
    return out
