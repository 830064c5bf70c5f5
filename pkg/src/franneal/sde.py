"""Annealing energy landscapes and the Euler scheme for
dX = -grad g(X) dt + sqrt(2T) dB^H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fbm import FbmPath, HurstParam, TimeGrid, WienerPath, phi_eps

__all__ = [
    "EnergyFunction",
    "AnnealingConfig",
    "StatePath",
    "IntegrationError",
    "builtin_energy",
    "euler_maruyama",
    "euler_semimartingale",
]


class IntegrationError(RuntimeError):
    """Raised when a trajectory leaves the finite range; carries the step index."""

    def __init__(self, step: int, message: str):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class EnergyFunction:
    """Energy landscape g with analytic gradient and Hessian."""

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    name: str


@dataclass(frozen=True)
class AnnealingConfig:
    temperature: float
    hurst_per_dim: tuple[HurstParam, ...]
    epsilon_per_dim: tuple[float, ...]
    initial_state: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        # temperature = 0 is the documented zero-noise (plain descent) mode
        if self.temperature < 0.0:
            raise ValueError("temperature must be nonnegative")
        d = len(self.initial_state)
        if len(self.hurst_per_dim) != d or len(self.epsilon_per_dim) != d:
            raise ValueError("per-dimension lists must match the state dimension")


@dataclass(frozen=True)
class StatePath:
    grid: TimeGrid
    dim: int
    values: np.ndarray  # (n_steps + 1, dim)


def _quadratic(params: Sequence[float]) -> EnergyFunction:
    # params = flat Q (d*d) followed by m (d)
    n = len(params)
    d = int((-1 + math.isqrt(1 + 4 * n)) // 2)
    if d * d + d != n:
        raise ValueError("quadratic params must be a flat d*d matrix followed by m (d)")
    Q = np.asarray(params[: d * d], dtype=float).reshape(d, d)
    m = np.asarray(params[d * d :], dtype=float)
    if not np.allclose(Q, Q.T, rtol=1e-12, atol=1e-12):
        raise ValueError("Q must be symmetric")
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise ValueError("Q must be symmetric positive definite") from None
    return EnergyFunction(
        dim=d,
        value=lambda x: 0.5 * float((x - m) @ Q @ (x - m)),
        gradient=lambda x: Q @ (x - m),
        hessian=lambda x: Q.copy(),
        name="quadratic",
    )


def _double_well(params: Sequence[float]) -> EnergyFunction:
    if len(params) != 1:
        raise ValueError("double_well takes a single parameter kappa")
    kappa = float(params[0])
    return EnergyFunction(
        dim=2,
        value=lambda x: (x[0] ** 2 - 1.0) ** 2 + kappa * x[1] ** 2,
        gradient=lambda x: np.array([4.0 * x[0] * (x[0] ** 2 - 1.0), 2.0 * kappa * x[1]]),
        hessian=lambda x: np.array([[12.0 * x[0] ** 2 - 4.0, 0.0], [0.0, 2.0 * kappa]]),
        name="double_well",
    )


def _rosenbrock(params: Sequence[float]) -> EnergyFunction:
    if len(params) != 2:
        raise ValueError("rosenbrock takes parameters (a, b)")
    a, b = float(params[0]), float(params[1])
    return EnergyFunction(
        dim=2,
        value=lambda x: (a - x[0]) ** 2 + b * (x[1] - x[0] ** 2) ** 2,
        gradient=lambda x: np.array(
            [
                -2.0 * (a - x[0]) - 4.0 * b * x[0] * (x[1] - x[0] ** 2),
                2.0 * b * (x[1] - x[0] ** 2),
            ]
        ),
        hessian=lambda x: np.array(
            [
                [2.0 - 4.0 * b * (x[1] - 3.0 * x[0] ** 2), -4.0 * b * x[0]],
                [-4.0 * b * x[0], 2.0 * b],
            ]
        ),
        name="rosenbrock",
    )


def _zero(params: Sequence[float]) -> EnergyFunction:
    # g == 0; exists so noise-only trajectories can be tested exactly
    if len(params) != 1:
        raise ValueError("zero takes a single parameter: the dimension")
    d = int(params[0])
    if d < 1:
        raise ValueError("dimension must be positive")
    return EnergyFunction(
        dim=d,
        value=lambda x: 0.0,
        gradient=lambda x: np.zeros(d),
        hessian=lambda x: np.zeros((d, d)),
        name="zero",
    )


_FAMILIES = {
    "quadratic": _quadratic,
    "double_well": _double_well,
    "rosenbrock": _rosenbrock,
    "zero": _zero,
}


def builtin_energy(name: str, params: Sequence[float]) -> EnergyFunction:
    """Instantiate one of the built-in energy families.

    quadratic:   params = flat symmetric SPD Q (d*d) then center m (d)
    double_well: params = [kappa], g = (x1^2-1)^2 + kappa*x2^2
    rosenbrock:  params = [a, b]
    zero:        params = [dim], g identically 0
    """
    try:
        family = _FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown energy family {name!r}") from None
    return family(params)


def _check_finite(x: np.ndarray, step: int):
    if not np.all(np.isfinite(x)):
        raise IntegrationError(
            step, f"non-finite state at step {step}: {x}"
        )


def euler_maruyama(
    g: EnergyFunction, cfg: AnnealingConfig, driving: Sequence[FbmPath]
) -> StatePath:
    """X_{n+1} = X_n - grad g(X_n) dt + sqrt(2T) (B_{n+1} - B_n), per dimension."""
    d = g.dim
    if len(driving) != d:
        raise ValueError("need one driving path per dimension")
    for p in driving:
        if p.grid != cfg.grid:
            raise ValueError("driving path grid does not match the config grid")
    dt = cfg.grid.dt
    scale = math.sqrt(2.0 * cfg.temperature)
    db = np.column_stack([np.diff(p.values) for p in driving])
    out = np.empty((cfg.grid.n_steps + 1, d))
    out[0] = np.asarray(cfg.initial_state, dtype=float)
    x = out[0]
    for n in range(cfg.grid.n_steps):
        x = x - g.gradient(x) * dt + scale * db[n]
        _check_finite(x, n + 1)
        out[n + 1] = x
    return StatePath(grid=cfg.grid, dim=d, values=out)


def euler_semimartingale(
    g: EnergyFunction, cfg: AnnealingConfig, w: WienerPath
) -> StatePath:
    """Same recursion, but each fractional increment is replaced by its
    semimartingale form alpha * phi^eps(t_n) * dt + eps^alpha * dW_n."""
    d = g.dim
    if w.dims != d or w.grid != cfg.grid:
        raise ValueError("Wiener path does not match the config")
    if any(e <= 0.0 for e in cfg.epsilon_per_dim):
        raise ValueError("euler_semimartingale requires strictly positive epsilon")
    dt = cfg.grid.dt
    scale = math.sqrt(2.0 * cfg.temperature)
    db = np.empty((cfg.grid.n_steps, d))
    for j in range(d):
        h = cfg.hurst_per_dim[j]
        eps = cfg.epsilon_per_dim[j]
        phi = phi_eps(w, h, eps, dim_index=j).values
        db[:, j] = h.alpha * phi[:-1] * dt + eps**h.alpha * w.increments[:, j]
    out = np.empty((cfg.grid.n_steps + 1, d))
    out[0] = np.asarray(cfg.initial_state, dtype=float)
    x = out[0]
    for n in range(cfg.grid.n_steps):
        x = x - g.gradient(x) * dt + scale * db[n]
        _check_finite(x, n + 1)
        out[n + 1] = x
    return StatePath(grid=cfg.grid, dim=d, values=out)
