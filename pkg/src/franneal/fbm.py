"""Liouville fractional Brownian motion, its epsilon-regularization, and
deterministic covariance oracles.

The driving object is a discretized Wiener path; every fractional path is a
causal convolution of its increments with the power kernel
(t - s + eps)^alpha, alpha = H - 1/2, discretized by the left-endpoint
(Ito) rule.  eps = 0 means the exact Liouville kernel; the last summand then
uses the finite factor dt^alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._kernels import causal_convolve

__all__ = [
    "HurstParam",
    "TimeGrid",
    "WienerPath",
    "FbmPath",
    "rng_stream",
    "sample_wiener",
    "refine_wiener",
    "fbm_from_wiener",
    "fbm_value_at",
    "phi_eps",
    "liouville_covariance",
    "liouville_covariance_discrete",
    "mandelbrot_covariance",
    "eps_diff_variance",
    "eps_diff_variance_discrete",
]


@dataclass(frozen=True)
class HurstParam:
    """Hurst exponent H in (0,1) with the derived kernel exponent alpha = H - 1/2."""

    H: float
    alpha: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.H < 1.0:
            raise ValueError(f"Hurst exponent must lie in (0, 1), got {self.H}")
        object.__setattr__(self, "alpha", self.H - 0.5)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_N = t_end."""

    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def node_index(self, t: float, tol: float = 1e-9) -> int:
        """Index of the grid node equal to t; raises if t is off-grid."""
        idx = int(round(t / self.dt))
        if idx < 0 or idx > self.n_steps or abs(idx * self.dt - t) > tol:
            raise ValueError(f"t={t} is not a node of the grid")
        return idx

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.t_end, 2 * self.n_steps)


def rng_stream(master_seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based stream: Philox keyed by (master_seed, stream_id).

    Distinct stream ids give statistically independent generators; the same
    pair always reproduces the same draws.
    """
    if not 0 <= master_seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    if not 0 <= stream_id < 2**64:
        raise ValueError("stream_id must fit in an unsigned 64-bit integer")
    key = np.array([master_seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class WienerPath:
    """Brownian increments on a grid; increments[i, j] = W^j_{t_{i+1}} - W^j_{t_i}."""

    grid: TimeGrid
    dims: int
    increments: np.ndarray  # (n_steps, dims)
    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.increments.shape != (self.grid.n_steps, self.dims):
            raise ValueError("increment matrix shape does not match grid/dims")

    def cumulative(self, dim_index: int = 0) -> np.ndarray:
        """W at the grid nodes (starts at 0)."""
        out = np.zeros(self.grid.n_steps + 1)
        out[1:] = np.cumsum(self.increments[:, dim_index])
        return out


def sample_wiener(grid: TimeGrid, dims: int, seed: int, stream: int = 0) -> WienerPath:
    """Draw N(0, dt) increments from the (seed, stream) Philox generator.

    Dimensions are filled jointly (row-major over the (step, dim) block), so
    the dims=1 output is not a column of the dims=2 output for the same seed.
    """
    if dims < 1:
        raise ValueError("dims must be at least 1")
    rng = rng_stream(seed, stream)
    inc = rng.standard_normal((grid.n_steps, dims)) * math.sqrt(grid.dt)
    return WienerPath(grid=grid, dims=dims, increments=inc, seed=seed, stream=stream)


def refine_wiener(w: WienerPath, refine_stream: int) -> WienerPath:
    """Halve the step of a Wiener path by Brownian-bridge midpoint insertion.

    Conditional on an increment d over dt, the first half-step increment is
    d/2 + z*sqrt(dt)/2 with z standard normal; the second half makes up the
    difference, so the coarse path is embedded exactly in the fine one.
    """
    grid = w.grid
    rng = rng_stream(w.seed, refine_stream)
    z = rng.standard_normal((grid.n_steps, w.dims))
    half = w.increments / 2.0 + z * (math.sqrt(grid.dt) / 2.0)
    fine = np.empty((2 * grid.n_steps, w.dims))
    fine[0::2] = half
    fine[1::2] = w.increments - half
    return WienerPath(
        grid=grid.refined(), dims=w.dims, increments=fine, seed=w.seed, stream=w.stream
    )


@dataclass(frozen=True)
class FbmPath:
    """Values of B^H (eps = 0) or B^{H,eps} at the grid nodes."""

    grid: TimeGrid
    hurst: HurstParam
    epsilon: float
    values: np.ndarray  # (n_steps + 1,)
    source_seed: int

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be nonnegative")
        if self.values.shape != (self.grid.n_steps + 1,):
            raise ValueError("value vector length does not match grid")
        if self.values[0] != 0.0:
            raise ValueError("fractional path must start at 0")


def _power_kernel(grid: TimeGrid, exponent: float, epsilon: float) -> np.ndarray:
    lags = np.arange(1, grid.n_steps + 1) * grid.dt
    return (lags + epsilon) ** exponent


def fbm_from_wiener(
    w: WienerPath, hurst: HurstParam, epsilon: float, dim_index: int = 0
) -> FbmPath:
    """Left-endpoint discretization of int_0^t (t - s + eps)^alpha dW_s.

    values[n] = sum_{i<n} ((t_n - t_i) + eps)^alpha * dW_i.  For H = 1/2 the
    kernel is identically 1 and the result is the exact running sum of the
    Wiener increments, bit for bit.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if not 0 <= dim_index < w.dims:
        raise ValueError(f"dim_index {dim_index} outside 0..{w.dims - 1}")
    dw = np.ascontiguousarray(w.increments[:, dim_index])
    values = np.zeros(w.grid.n_steps + 1)
    if hurst.alpha == 0.0:
        values[1:] = np.cumsum(dw)
    else:
        kernel = _power_kernel(w.grid, hurst.alpha, epsilon)
        values[1:] = causal_convolve(kernel, dw)
    return FbmPath(
        grid=w.grid, hurst=hurst, epsilon=epsilon, values=values, source_seed=w.seed
    )


def fbm_value_at(
    w: WienerPath, hurst: HurstParam, epsilon: float, dim_index: int, node: int
) -> float:
    """Single-node evaluation of the same discrete sum, O(N) instead of O(N^2)."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if not 0 <= node <= w.grid.n_steps:
        raise ValueError("node outside the grid")
    if node == 0:
        return 0.0
    dw = w.increments[:node, dim_index]
    lags = np.arange(node, 0, -1) * w.grid.dt
    return float(((lags + epsilon) ** hurst.alpha) @ dw)


def phi_eps(
    w: WienerPath, hurst: HurstParam, epsilon: float, dim_index: int = 0
) -> FbmPath:
    """Drift process of the semimartingale decomposition of B^{H,eps}:

    values[n] = sum_{i<n} ((t_n - t_i) + eps)^(alpha-1) * dW_i.

    The kernel exponent is always negative, so eps must be strictly positive.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be strictly positive")
    if not 0 <= dim_index < w.dims:
        raise ValueError(f"dim_index {dim_index} outside 0..{w.dims - 1}")
    dw = np.ascontiguousarray(w.increments[:, dim_index])
    kernel = _power_kernel(w.grid, hurst.alpha - 1.0, epsilon)
    values = np.zeros(w.grid.n_steps + 1)
    values[1:] = causal_convolve(kernel, dw)
    return FbmPath(
        grid=w.grid, hurst=hurst, epsilon=epsilon, values=values, source_seed=w.seed
    )


def liouville_covariance(
    t: float, s: float, hurst: HurstParam, epsilon: float = 0.0, abs_tol: float = 1e-10
) -> float:
    """Cov(B_t, B_s) = int_0^{min(t,s)} (t-u+eps)^a (s-u+eps)^a du by adaptive
    quadrature.

    For eps = 0 and a < 0 the integrand blows up algebraically at u = min(t,s);
    that endpoint is handled with a QAWS (algebraic weight) rule after the
    substitution v = min(t,s) - u.
    """
    if t < 0.0 or s < 0.0:
        raise ValueError("t and s must be nonnegative")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    a = hurst.alpha
    m = min(t, s)
    if m == 0.0:
        return 0.0
    if a == 0.0:
        return m
    lo, hi = m, max(t, s)
    if epsilon > 0.0 or a > 0.0:
        val, _ = integrate.quad(
            lambda u: (t - u + epsilon) ** a * (s - u + epsilon) ** a,
            0.0,
            m,
            epsabs=abs_tol,
            epsrel=abs_tol,
            limit=200,
        )
        return val
    # eps = 0, a < 0: substitute v = m - u, integrand = v^p * smooth(v)
    if lo == hi:
        p = 2.0 * a
        smooth = lambda v: 1.0
    else:
        p = a
        smooth = lambda v: (hi - lo + v) ** a
    val, _ = integrate.quad(
        smooth, 0.0, m, weight="alg", wvar=(p, 0.0), epsabs=abs_tol, limit=200
    )
    return val


def liouville_covariance_discrete(
    t: float, s: float, hurst: HurstParam, epsilon: float, grid: TimeGrid
) -> float:
    """Covariance implied by the left-endpoint discrete kernel on the grid.

    This is the exact second moment of the simulated (discretized) process, so
    Monte Carlo comparisons against it carry no discretization bias.
    """
    nt, ns = grid.node_index(t), grid.node_index(s)
    n = min(nt, ns)
    if n == 0:
        return 0.0
    ti = np.arange(n) * grid.dt
    kt = (t - ti + epsilon) ** hurst.alpha
    ks = (s - ti + epsilon) ** hurst.alpha
    return float(np.sum(kt * ks) * grid.dt)


def mandelbrot_covariance(t: float, s: float, hurst: HurstParam) -> float:
    """Covariance of Mandelbrot-form fBm: (t^2H + s^2H - |t-s|^2H) / 2."""
    if t < 0.0 or s < 0.0:
        raise ValueError("t and s must be nonnegative")
    h2 = 2.0 * hurst.H
    return 0.5 * (t**h2 + s**h2 - abs(t - s) ** h2)


def eps_diff_variance(
    t: float,
    hurst: HurstParam,
    epsilon: float,
    abs_tol: float = 1e-12,
    rel_tol: float = 1e-8,
) -> float:
    """E[(B^{H,eps}_t - B^H_t)^2] = int_0^t [(u+eps)^a - u^a]^2 du.

    Identically zero for H = 1/2.  For a < 0 the integrand behaves like u^{2a}
    near 0; QAWS absorbs that power so the adaptive rule only sees the bounded
    factor ((1 + eps/u)^a - 1)^2.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be strictly positive")
    a = hurst.alpha
    if a == 0.0:
        return 0.0
    if a < 0.0:
        # (u+eps)^a u^-a written as (u/(u+eps))^-a so u = 0 evaluates cleanly
        val, _ = integrate.quad(
            lambda u: ((u / (u + epsilon)) ** (-a) - 1.0) ** 2,
            0.0,
            t,
            weight="alg",
            wvar=(2.0 * a, 0.0),
            epsabs=abs_tol,
            limit=500,
        )
        return val
    val, _ = integrate.quad(
        lambda u: ((u + epsilon) ** a - u**a) ** 2,
        0.0,
        t,
        epsabs=abs_tol,
        epsrel=rel_tol,
        limit=200,
    )
    return val


def eps_diff_variance_discrete(
    t: float, hurst: HurstParam, epsilon: float, grid: TimeGrid
) -> float:
    """Discrete-kernel counterpart of eps_diff_variance on the grid (the exact
    second moment of the coupled simulated difference)."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be strictly positive")
    n = grid.node_index(t)
    if n == 0:
        return 0.0
    lags = np.arange(1, n + 1) * grid.dt
    diff = (lags + epsilon) ** hurst.alpha - lags**hurst.alpha
    return float(np.sum(diff**2) * grid.dt)
