"""Steady states, linearization around them, and the explicit linear
(Ornstein-Uhlenbeck type) solution driven by fractional noise.

Two matrix-exponential routes exist side by side: a general scaling-and-
squaring route (the oracle) and a 2x2 closed form with its lambda/xi
parameters.  The closed form is kept as-is and its deviation from the
general route is reported, never silently corrected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm as _scipy_expm

from ._kernels import linear_recursion
from .fbm import FbmPath, TimeGrid
from .sde import EnergyFunction, StatePath

__all__ = [
    "SteadyState",
    "LinearModel",
    "LinearSolutionPath",
    "ConvergenceError",
    "find_steady_state",
    "linearize",
    "expm_general",
    "expm_closed",
    "expm_deviation",
    "linear_solution",
    "reconstruct_state",
]


class ConvergenceError(RuntimeError):
    """Steady-state search failed; carries the best iterate found."""

    def __init__(self, message: str, best_point: np.ndarray, gradient_norm: float):
        super().__init__(message)
        self.best_point = best_point
        self.gradient_norm = gradient_norm


@dataclass(frozen=True)
class SteadyState:
    point: np.ndarray
    gradient_norm: float
    iterations: int


@dataclass(frozen=True)
class LinearModel:
    """Linearized deviation dynamics dU = A U dt + sqrt(2T) dB^H around X*.

    A is the negative Hessian at the steady state.  For 2x2 models the named
    entries (a1 b1 / a2 b2) and the closed-form parameters are populated:
    xi_abs = |a2 - b2^2/4|, xi_sqrt its square root
    (the oscillation frequency a 2x2 exponential actually has).
    """

    steady: SteadyState
    A: np.ndarray
    temperature: float
    a1: float | None = None
    b1: float | None = None
    a2: float | None = None
    b2: float | None = None
    lam: float | None = None
    xi_abs: float | None = None
    xi_sqrt: float | None = None


@dataclass(frozen=True)
class LinearSolutionPath:
    grid: TimeGrid
    values: np.ndarray  # (n_steps + 1, dim)
    epsilon: tuple[float, ...]

    def __post_init__(self):
        if np.any(self.values[0] != 0.0):
            raise ValueError("linear solution must start at zero deviation")


def _is_spd(hess: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(hess)
        return True
    except np.linalg.LinAlgError:
        return False


def find_steady_state(
    g: EnergyFunction,
    x_init: Sequence[float],
    tol: float = 1e-10,
    max_iter: int = 100,
) -> SteadyState:
    """Newton iteration on grad g = 0 with safeguards.

    The Newton step is halved (at most 30 times) until the gradient norm
    decreases.  When the Hessian is singular or indefinite, or halving fails,
    a backtracking gradient-descent step on g is taken instead, which keeps
    the iteration inside the descent basin of the starting point.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    x = np.asarray(x_init, dtype=float).copy()
    grad = g.gradient(x)
    gnorm = float(np.linalg.norm(grad))
    best_x, best_norm = x.copy(), gnorm
    for it in range(1, max_iter + 1):
        if gnorm <= tol:
            return SteadyState(point=x, gradient_norm=gnorm, iterations=it - 1)
        hess = g.hessian(x)
        moved = False
        if _is_spd(hess):
            step = np.linalg.solve(hess, -grad)
            fx = g.value(x)
            lam = 1.0
            for _ in range(30):
                trial = x + lam * step
                tnorm = float(np.linalg.norm(g.gradient(trial)))
                # a step is acceptable if it shrinks the residual or the energy
                if tnorm < gnorm or g.value(trial) < fx:
                    x, gnorm = trial, tnorm
                    moved = True
                    break
                lam *= 0.5
        if not moved:
            # damped gradient descent on g
            fx = g.value(x)
            eta = 1.0 / max(1.0, float(np.linalg.norm(grad)))
            for _ in range(40):
                trial = x - eta * grad
                if g.value(trial) < fx:
                    x = trial
                    gnorm = float(np.linalg.norm(g.gradient(x)))
                    moved = True
                    break
                eta *= 0.5
        if not moved:
            break
        grad = g.gradient(x)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < best_norm:
            best_x, best_norm = x.copy(), gnorm
    if gnorm <= tol:
        return SteadyState(point=x, gradient_norm=gnorm, iterations=max_iter)
    raise ConvergenceError(
        f"no steady state within tol={tol} after {max_iter} iterations "
        f"(best gradient norm {best_norm:.3e})",
        best_point=best_x,
        gradient_norm=best_norm,
    )


def linearize(g: EnergyFunction, steady: SteadyState, temperature: float) -> LinearModel:
    """A = Jacobian of F = -grad g at X*, i.e. the negative Hessian.

    The Hessian of a C^2 energy is symmetric, so both orderings of the mixed
    partials coincide; asymmetry beyond 1e-10 relative is rejected.
    """
    hess = g.hessian(steady.point)
    scale = max(1.0, float(np.max(np.abs(hess))))
    if np.max(np.abs(hess - hess.T)) > 1e-10 * scale:
        raise ValueError("Hessian at the steady state is not symmetric")
    A = -np.asarray(hess, dtype=float)
    if g.dim != 2:
        return LinearModel(steady=steady, A=A, temperature=temperature)
    a1, b1 = float(A[0, 0]), float(A[0, 1])
    a2, b2 = float(A[1, 0]), float(A[1, 1])
    disc = abs(a2 - b2**2 / 4.0)
    return LinearModel(
        steady=steady,
        A=A,
        temperature=temperature,
        a1=a1,
        b1=b1,
        a2=a2,
        b2=b2,
        lam=-b2 / 2.0,
        xi_abs=disc,
        xi_sqrt=math.sqrt(disc),
    )


def expm_general(A: np.ndarray, tau: float) -> np.ndarray:
    """e^{A tau} by scaling-and-squaring with a Pade approximant."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)) or not math.isfinite(tau):
        raise ValueError("expm_general requires finite inputs")
    return _scipy_expm(A * tau)


def expm_closed(model: LinearModel, tau: float, xi_mode: str = "abs") -> np.ndarray:
    """Closed-form 2x2 exponential:

        e^{A tau} = e^{-lam tau}/xi * [(xi cos(xi tau) + lam sin(xi tau)) I
                                        + A sin(xi tau)]

    with trigonometric arguments xi*tau throughout.  xi_mode selects
    xi_abs ("abs") or its square root ("sqrt").
    """
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    if model.lam is None:
        raise ValueError("closed form requires a 2x2 model")
    if xi_mode == "abs":
        xi = model.xi_abs
    elif xi_mode == "sqrt":
        xi = model.xi_sqrt
    else:
        raise ValueError(f"unknown xi_mode {xi_mode!r}")
    if xi == 0.0:
        raise ValueError("closed form undefined for xi = 0")
    lam = model.lam
    arg = xi * tau
    eye = np.eye(2)
    return (
        math.exp(-lam * tau)
        / xi
        * ((xi * math.cos(arg) + lam * math.sin(arg)) * eye + model.A * math.sin(arg))
    )


def expm_deviation(model: LinearModel, tau: float, xi_mode: str = "abs") -> float:
    """Frobenius-norm gap between the closed form and the general route."""
    return float(
        np.linalg.norm(expm_closed(model, tau, xi_mode) - expm_general(model.A, tau))
    )


def linear_solution(
    model: LinearModel,
    driving: Sequence[FbmPath],
    expm_mode: str = "general",
    xi_mode: str = "abs",
) -> LinearSolutionPath:
    """Discretized stochastic convolution U_t = int_0^t e^{A(t-s)} sqrt(2T) dB_s.

    Realized as the one-step recursion U_{n+1} = E U_n + sqrt(2T) dB_n with
    E = e^{A dt}, so the newest increment enters with weight I.  On a uniform
    grid this is exactly the convolution sum with cached powers of E.
    """
    d = model.A.shape[0]
    if len(driving) != d:
        raise ValueError("need one driving path per dimension")
    grid = driving[0].grid
    for p in driving[1:]:
        if p.grid != grid:
            raise ValueError("driving paths must share one grid")
    scale = math.sqrt(2.0 * model.temperature)
    eps = tuple(p.epsilon for p in driving)
    if np.all(model.A == 0.0):
        # e^{A dt} = I exactly: the sum collapses to sqrt(2T) * B, bit for bit
        values = scale * np.column_stack([p.values for p in driving])
        return LinearSolutionPath(grid=grid, values=values, epsilon=eps)
    if expm_mode == "general":
        E = expm_general(model.A, grid.dt)
    elif expm_mode == "closed":
        E = expm_closed(model, grid.dt, xi_mode)
    else:
        raise ValueError(f"unknown expm_mode {expm_mode!r}")
    db = np.column_stack([np.diff(p.values) for p in driving])
    values = linear_recursion(np.ascontiguousarray(E), np.ascontiguousarray(db), scale)
    return LinearSolutionPath(grid=grid, values=values, epsilon=eps)


def reconstruct_state(steady: SteadyState, u: LinearSolutionPath) -> StatePath:
    """X = X* + U, row by row."""
    d = u.values.shape[1]
    if steady.point.shape != (d,):
        raise ValueError("steady state and deviation path dimensions differ")
    return StatePath(grid=u.grid, dim=d, values=steady.point + u.values)
