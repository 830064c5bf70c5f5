"""Convergence quantification: coupled L2 distances, log-log rate fits,
Gronwall-style bound checks, and a Hurst estimator for sanity-checking
exported paths.

Norm convention: the L2(Omega) norm is the root mean square over replicates;
mean_sq is its square.  Every report states which of the two it carries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensembles import WienerEnsemble, fbm_ensemble, linear_solution_ensemble
from .fbm import FbmPath, HurstParam, TimeGrid, eps_diff_variance
from .steady import LinearModel, expm_general

__all__ = [
    "PathEnsemble",
    "L2Estimate",
    "RateReport",
    "GronwallReport",
    "l2_distance",
    "rate_regression",
    "fit_rate_constant",
    "gronwall_constant",
    "gronwall_check",
    "hurst_estimate",
]

DEFAULT_EPS_LADDER = tuple(2.0**-k for k in range(4, 11))


@dataclass(frozen=True)
class PathEnsemble:
    """A replicate-indexed bundle of paths sharing one grid and seed policy."""

    grid: TimeGrid
    values: np.ndarray  # (replicates, n_steps + 1, dim)
    master_seed: int

    @property
    def replicates(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class L2Estimate:
    """Monte Carlo estimate of E ||a_t - b_t||^2 with jackknife standard error."""

    t: float
    mean_sq: float
    std_error: float
    replicates: int

    @property
    def rms(self) -> float:
        return math.sqrt(self.mean_sq)


@dataclass(frozen=True)
class RateReport:
    eps_values: tuple[float, ...]
    errors: tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float

    @property
    def prefactor(self) -> float:
        """Fitted constant: errors ~ prefactor * eps^slope."""
        return math.exp(self.intercept)


@dataclass(frozen=True)
class GronwallReport:
    M_half: float
    M_safe: float
    C_alpha_eps: float
    t_checkpoints: tuple[float, ...]
    measured: tuple[float, ...]  # sum of per-coordinate RMS norms
    measured_se: tuple[float, ...]
    bound_half: tuple[float, ...]
    bound_safe: tuple[float, ...]


def _jackknife_se_of_mean(x: np.ndarray) -> float:
    n = x.size
    if n < 2:
        return 0.0
    total = np.sum(x)
    leave_one_out = (total - x) / (n - 1)
    center = np.mean(leave_one_out)
    return float(math.sqrt((n - 1) / n * np.sum((leave_one_out - center) ** 2)))


def l2_distance(paths_a: PathEnsemble, paths_b: PathEnsemble, t: float) -> L2Estimate:
    """Mean squared Euclidean deviation at grid node t over coupled replicates."""
    if paths_a.grid != paths_b.grid:
        raise ValueError("ensembles must share a grid")
    if paths_a.values.shape != paths_b.values.shape:
        raise ValueError("ensembles must have equal replicate counts and dimensions")
    if paths_a.master_seed != paths_b.master_seed:
        raise ValueError("coupled comparison requires identical replicate seeds")
    n = paths_a.grid.node_index(t)
    diff = paths_a.values[:, n, :] - paths_b.values[:, n, :]
    sq = np.sum(diff**2, axis=1)
    return L2Estimate(
        t=t,
        mean_sq=float(np.mean(sq)),
        std_error=_jackknife_se_of_mean(sq),
        replicates=sq.size,
    )


def rate_regression(eps_values: Sequence[float], errors: Sequence[float]) -> RateReport:
    """OLS fit of log(error) against log(eps)."""
    eps = np.asarray(eps_values, dtype=float)
    err = np.asarray(errors, dtype=float)
    if eps.size != err.size or eps.size < 4:
        raise ValueError("need at least 4 (eps, error) pairs")
    if np.any(eps <= 0.0) or np.any(err <= 0.0):
        raise ValueError("eps values and errors must be positive")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateReport(
        eps_values=tuple(eps),
        errors=tuple(err),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
    )


def fit_rate_constant(
    hurst: HurstParam, t: float, eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER
) -> RateReport:
    """Deterministic quadrature ladder for the variance of B^{H,eps}_t - B^H_t,
    fitted in log-log coordinates (slope should sit near 2H)."""
    errs = [eps_diff_variance(t, hurst, e) for e in eps_ladder]
    return rate_regression(list(eps_ladder), errs)


def gronwall_constant(
    hurst: HurstParam, t: float, eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER
) -> float:
    """Smallest constant making the premise rms(B^{H,eps}_t - B^H_t) <= C eps^{2H}
    hold across the tested ladder, from the deterministic quadrature values.

    The rms itself scales like eps^H, so no single constant works for all
    eps > 0; this is the tightest one valid on the range actually exercised.
    """
    return max(
        math.sqrt(eps_diff_variance(t, hurst, e)) / e ** (2.0 * hurst.H)
        for e in eps_ladder
    )


def gronwall_check(
    model: LinearModel,
    hurst: tuple[HurstParam, HurstParam],
    eps: tuple[float, float],
    w_ensemble: WienerEnsemble,
    t_checkpoints: Sequence[float],
    constants: tuple[float, float] | None = None,
) -> GronwallReport:
    """Measure ||U^1 - U^{1,eps1}|| + ||U^2 - U^{2,eps2}|| on coupled replicates
    and compare with C(alpha, eps) * exp(M t) for both M variants.

    C(alpha, eps) = sqrt(2T) * (C1 eps1^{2H1} + C2 eps2^{2H2}) with the
    premise constants C_j from the deterministic quadrature ladder (see
    gronwall_constant), so only the left side carries sampling noise.
    """
    if model.a1 is None:
        raise ValueError("gronwall_check needs a 2x2 linear model")
    if w_ensemble.dims != 2:
        raise ValueError("need a 2-dimensional Wiener ensemble")
    grid = w_ensemble.grid
    scale = math.sqrt(2.0 * model.temperature)
    E = expm_general(model.A, grid.dt)

    def solution(epsilons: tuple[float, float]) -> np.ndarray:
        paths = np.stack(
            [fbm_ensemble(w_ensemble, hurst[j], epsilons[j], j) for j in range(2)],
            axis=2,
        )
        return linear_solution_ensemble(E, np.diff(paths, axis=1), scale)

    u_exact = solution((0.0, 0.0))
    u_eps = solution(eps)

    measured, measured_se = [], []
    for t in t_checkpoints:
        n = grid.node_index(t)
        total, var = 0.0, 0.0
        for j in range(2):
            sq = (u_exact[:, n, j] - u_eps[:, n, j]) ** 2
            ms = float(np.mean(sq))
            se = _jackknife_se_of_mean(sq)
            rms = math.sqrt(ms)
            total += rms
            # delta method: se(rms) = se(mean_sq) / (2 rms)
            if rms > 0.0:
                var += (se / (2.0 * rms)) ** 2
        measured.append(total)
        measured_se.append(math.sqrt(var))

    if constants is None:
        constants = (
            gronwall_constant(hurst[0], grid.t_end),
            gronwall_constant(hurst[1], grid.t_end),
        )
    C = scale * sum(constants[j] * eps[j] ** (2.0 * hurst[j].H) for j in range(2))
    M_half = max(abs(model.a1), abs(model.a2), abs(model.b1), abs(model.b2)) / 2.0
    M_safe = max(abs(model.a1) + abs(model.b1), abs(model.a2) + abs(model.b2))
    return GronwallReport(
        M_half=M_half,
        M_safe=M_safe,
        C_alpha_eps=C,
        t_checkpoints=tuple(float(t) for t in t_checkpoints),
        measured=tuple(measured),
        measured_se=tuple(measured_se),
        bound_half=tuple(C * math.exp(M_half * t) for t in t_checkpoints),
        bound_safe=tuple(C * math.exp(M_safe * t) for t in t_checkpoints),
    )


def hurst_estimate(path: FbmPath) -> float:
    """Aggregated-variance estimate of H from dyadic block increments.

    Var(B_{t+m dt} - B_t) scales like (m dt)^{2H}; the estimate is half the
    OLS slope of log block-increment variance against log block size.
    Saturates near 1 on perfectly smooth paths.
    """
    n = path.grid.n_steps
    if n < 2**8:
        raise ValueError("path too short for aggregated-variance estimation")
    values = path.values
    sizes, variances = [], []
    m = 1
    while n // m >= 8:
        block = values[:: m][: (n // m) + 1]
        inc = np.diff(block)
        sizes.append(m)
        variances.append(float(np.mean(inc**2)))
        m *= 2
    slope, _ = np.polyfit(np.log(sizes), np.log(variances), 1)
    return float(slope / 2.0)
