"""Configuration-driven command-line front end.

Scenario files are strict YAML (unknown keys are errors); every command
writes CSV data plus a manifest.txt with per-file SHA-256 digests so re-runs
can be verified byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import gronwall_check, gronwall_constant, rate_regression
from .ensembles import fbm_ensemble, wiener_ensemble
from .fbm import (
    HurstParam,
    TimeGrid,
    eps_diff_variance,
    fbm_from_wiener,
    liouville_covariance,
    liouville_covariance_discrete,
    mandelbrot_covariance,
    sample_wiener,
)
from .sde import AnnealingConfig, builtin_energy, euler_maruyama
from .steady import (
    expm_deviation,
    find_steady_state,
    linear_solution,
    linearize,
    reconstruct_state,
)
DEFAULT_LADDER = [2.0**-k for k in range(4, 11)]


class ScenarioError(ValueError):
    pass


class CommandError(RuntimeError):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


@dataclass
class Scenario:
    name: str
    temperature: float
    hurst_per_dim: list[float]
    grid_t_end: float
    grid_n_steps: int
    master_seed: int
    x_init: list[float]
    energy_name: str | None = None
    energy_params: list[float] = field(default_factory=list)
    epsilon_ladder: list[float] = field(default_factory=lambda: list(DEFAULT_LADDER))
    replicates: int = 10_000
    checkpoints: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.checkpoints:
            self.checkpoints = [f * self.grid_t_end for f in (0.25, 0.5, 0.75, 1.0)]

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.grid_t_end, self.grid_n_steps)

    @property
    def hurst(self) -> list[HurstParam]:
        return [HurstParam(h) for h in self.hurst_per_dim]


def _require(cond: bool, path: str, reason: str):
    if not cond:
        raise ScenarioError(f"{path}: {reason}")


def load_scenario(path: str | Path) -> Scenario:
    """Parse and fully validate a scenario file before any computation."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    _require(isinstance(raw, dict), "<root>", "scenario must be a mapping")
    known = {
        "name",
        "energy",
        "temperature",
        "hurst_per_dim",
        "epsilon_ladder",
        "grid",
        "replicates",
        "master_seed",
        "x_init",
        "checkpoints",
    }
    for key in raw:
        _require(key in known, key, "unknown key")
    for key in ("name", "temperature", "hurst_per_dim", "grid", "master_seed", "x_init"):
        _require(key in raw, key, "missing required key")

    grid = raw["grid"]
    _require(isinstance(grid, dict), "grid", "must be a mapping")
    for key in grid:
        _require(key in {"t_end", "n_steps"}, f"grid.{key}", "unknown key")
    _require("t_end" in grid and "n_steps" in grid, "grid", "needs t_end and n_steps")
    _require(float(grid["t_end"]) > 0, "grid.t_end", "must be positive")
    _require(int(grid["n_steps"]) >= 1, "grid.n_steps", "must be a positive integer")

    hurst = raw["hurst_per_dim"]
    _require(isinstance(hurst, list) and hurst, "hurst_per_dim", "must be a nonempty list")
    for i, h in enumerate(hurst):
        _require(0.0 < float(h) < 1.0, f"hurst_per_dim[{i}]", "must lie in (0, 1)")

    _require(float(raw["temperature"]) >= 0.0, "temperature", "must be nonnegative")
    seed = int(raw["master_seed"])
    _require(0 <= seed < 2**64, "master_seed", "must fit in 64 bits")

    x_init = [float(v) for v in raw["x_init"]]
    _require(len(x_init) == len(hurst), "x_init", "length must match hurst_per_dim")

    ladder = raw.get("epsilon_ladder", list(DEFAULT_LADDER))
    _require(isinstance(ladder, list), "epsilon_ladder", "must be a list")
    for i, e in enumerate(ladder):
        _require(float(e) > 0.0, f"epsilon_ladder[{i}]", "must be positive")

    replicates = int(raw.get("replicates", 10_000))
    _require(replicates >= 1, "replicates", "must be at least 1")

    checkpoints = [float(c) for c in raw.get("checkpoints", [])]
    for i, c in enumerate(checkpoints):
        _require(
            0.0 < c <= float(grid["t_end"]), f"checkpoints[{i}]", "must lie in (0, t_end]"
        )

    energy_name, energy_params = None, []
    if "energy" in raw:
        en = raw["energy"]
        _require(isinstance(en, dict), "energy", "must be a mapping")
        for key in en:
            _require(key in {"name", "params"}, f"energy.{key}", "unknown key")
        _require("name" in en, "energy.name", "missing")
        energy_name = str(en["name"])
        energy_params = [float(p) for p in en.get("params", [])]
        try:
            e = builtin_energy(energy_name, energy_params)
        except ValueError as exc:
            raise ScenarioError(f"energy: {exc}") from None
        _require(e.dim == len(hurst), "energy", "dimension must match hurst_per_dim")

    return Scenario(
        name=str(raw["name"]),
        temperature=float(raw["temperature"]),
        hurst_per_dim=[float(h) for h in hurst],
        grid_t_end=float(grid["t_end"]),
        grid_n_steps=int(grid["n_steps"]),
        master_seed=seed,
        x_init=x_init,
        energy_name=energy_name,
        energy_params=energy_params,
        epsilon_ladder=[float(e) for e in ladder],
        replicates=replicates,
        checkpoints=checkpoints,
    )


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, scenario: Scenario, command: str, seed: int, digests: dict):
    lines = [
        f"tool: franneal {__version__}",
        f"command: {command}",
        f"timestamp: {datetime.datetime.now(datetime.timezone.utc).isoformat()}",
        f"scenario: {scenario.name}",
        f"effective_seed: {seed}",
    ]
    for fname, digest in sorted(digests.items()):
        lines.append(f"file: {fname} sha256={digest}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _energy_or_fail(sc: Scenario):
    if sc.energy_name is None:
        raise CommandError("scenario", "this command requires an energy in the scenario")
    return builtin_energy(sc.energy_name, sc.energy_params)


def cmd_simulate_fbm(sc: Scenario, out: Path, seed: int, threads: int) -> dict:
    grid = sc.grid
    dims = len(sc.hurst_per_dim)
    rows = []
    for r in range(sc.replicates):
        w = sample_wiener(grid, dims, seed, stream=r)
        for j, h in enumerate(sc.hurst):
            for eps in [0.0] + sc.epsilon_ladder:
                p = fbm_from_wiener(w, h, eps, dim_index=j)
                for t, v in zip(grid.nodes, p.values):
                    rows.append((t, r, j, v, eps))
    digest = _write_csv(out / "fbm_paths.csv", ["t", "replicate", "dim", "value", "epsilon"], rows)
    return {"fbm_paths.csv": digest}


def cmd_anneal(sc: Scenario, out: Path, seed: int, threads: int) -> dict:
    g = _energy_or_fail(sc)
    grid = sc.grid
    d = g.dim
    cfg = AnnealingConfig(
        temperature=sc.temperature,
        hurst_per_dim=tuple(sc.hurst),
        epsilon_per_dim=(0.0,) * d,
        initial_state=np.asarray(sc.x_init),
        grid=grid,
    )
    paths = np.empty((sc.replicates, grid.n_steps + 1, d))
    for r in range(sc.replicates):
        w = sample_wiener(grid, d, seed, stream=r)
        driving = [fbm_from_wiener(w, sc.hurst[j], 0.0, j) for j in range(d)]
        try:
            paths[r] = euler_maruyama(g, cfg, driving).values
        except Exception as exc:
            raise CommandError("runtime", f"replicate {r}: {exc}") from exc
    energies = np.array([[g.value(x) for x in path] for path in paths])

    path_rows = []
    for r in range(sc.replicates):
        for n, t in enumerate(grid.nodes):
            path_rows.append((t, r, *paths[r, n], energies[r, n]))
    coord_cols = [f"x{j + 1}" for j in range(d)]
    digests = {}
    digests["anneal_paths.csv"] = _write_csv(
        out / "anneal_paths.csv", ["t", "replicate", *coord_cols, "energy"], path_rows
    )

    R = sc.replicates
    sem = lambda a: np.std(a, axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros(a.shape[1])
    mean_x = np.mean(paths, axis=0)
    se_x = sem(paths)
    mean_e = np.mean(energies, axis=0)
    se_e = np.std(energies, axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(mean_e)
    summary_rows = [
        (t, *mean_x[n], mean_e[n], *se_x[n], se_e[n]) for n, t in enumerate(grid.nodes)
    ]
    digests["anneal_summary.csv"] = _write_csv(
        out / "anneal_summary.csv",
        ["t", *(f"mean_{c}" for c in coord_cols), "mean_energy",
         *(f"se_{c}" for c in coord_cols), "se_energy"],
        summary_rows,
    )
    return digests


def cmd_linearize(sc: Scenario, out: Path, seed: int, threads: int) -> dict:
    g = _energy_or_fail(sc)
    if g.dim != 2:
        raise CommandError("scenario", "linearize requires a 2-dimensional energy")
    grid = sc.grid
    try:
        steady = find_steady_state(g, sc.x_init)
    except Exception as exc:
        raise CommandError("runtime", f"steady-state search failed: {exc}") from exc
    model = linearize(g, steady, sc.temperature)

    model_row = (
        *steady.point,
        model.a1,
        model.b1,
        model.a2,
        model.b2,
        model.lam,
        model.xi_abs,
        model.xi_sqrt,
        expm_deviation(model, grid.dt, "abs") if model.xi_abs else float("nan"),
        expm_deviation(model, grid.dt, "sqrt") if model.xi_sqrt else float("nan"),
    )
    digests = {}
    digests["linear_model.csv"] = _write_csv(
        out / "linear_model.csv",
        ["x_star_1", "x_star_2", "a1", "b1", "a2", "b2", "lambda",
         "xi_abs", "xi_sqrt", "expm_dev_abs_dt", "expm_dev_sqrt_dt"],
        [model_row],
    )

    path_rows = []
    for r in range(sc.replicates):
        w = sample_wiener(grid, 2, seed, stream=r)
        for eps in [0.0] + sc.epsilon_ladder:
            driving = [fbm_from_wiener(w, sc.hurst[j], eps, j) for j in range(2)]
            u = linear_solution(model, driving, expm_mode="general")
            x = reconstruct_state(steady, u)
            for n, t in enumerate(grid.nodes):
                path_rows.append((t, r, eps, *u.values[n], *x.values[n]))
    digests["linear_paths.csv"] = _write_csv(
        out / "linear_paths.csv",
        ["t", "replicate", "epsilon", "u1", "u2", "x1", "x2"],
        path_rows,
    )
    return digests


def cmd_converge(sc: Scenario, out: Path, seed: int, threads: int) -> dict:
    if len(sc.epsilon_ladder) < 4:
        raise CommandError("scenario", "epsilon_ladder needs at least 4 rungs")
    for j, h in enumerate(sc.hurst_per_dim):
        if h == 0.5:
            raise CommandError(
                "scenario",
                f"hurst_per_dim[{j}] = 0.5: the approximation difference is "
                "identically zero and carries no rate",
            )
    g = _energy_or_fail(sc)
    if g.dim != 2:
        raise CommandError("scenario", "converge requires a 2-dimensional energy")
    grid = sc.grid
    t_end = sc.grid_t_end

    rate_rows = []
    for j, h in enumerate(sc.hurst):
        variances = [eps_diff_variance(t_end, h, e) for e in sc.epsilon_ladder]
        var_fit = rate_regression(sc.epsilon_ladder, variances)
        rms_fit = rate_regression(sc.epsilon_ladder, [math.sqrt(v) for v in variances])
        rate_rows.append(
            (j, h.H, var_fit.slope, var_fit.intercept, var_fit.r_squared, rms_fit.slope)
        )
    digests = {}
    digests["rate_report.csv"] = _write_csv(
        out / "rate_report.csv",
        ["dim", "H", "slope_variance", "intercept", "r_squared", "slope_rms"],
        rate_rows,
    )

    steady = find_steady_state(g, sc.x_init)
    model = linearize(g, steady, sc.temperature)
    w_ens = wiener_ensemble(grid, 2, seed, sc.replicates, threads=threads)
    consts = tuple(
        gronwall_constant(h, t_end, sc.epsilon_ladder) for h in sc.hurst
    )
    gw_rows = []
    for eps in sc.epsilon_ladder:
        rep = gronwall_check(
            model,
            (sc.hurst[0], sc.hurst[1]),
            (eps, eps),
            w_ens,
            sc.checkpoints,
            constants=consts,
        )
        for k, t in enumerate(rep.t_checkpoints):
            gw_rows.append(
                (eps, t, rep.measured[k], rep.measured_se[k],
                 rep.bound_half[k], rep.bound_safe[k], rep.M_half, rep.M_safe)
            )
    digests["gronwall_report.csv"] = _write_csv(
        out / "gronwall_report.csv",
        ["epsilon", "t", "measured", "measured_se",
         "bound_half", "bound_safe", "M_half", "M_safe"],
        gw_rows,
    )
    return digests


def cmd_covcheck(sc: Scenario, out: Path, seed: int, threads: int) -> dict:
    grid = sc.grid
    # (t, s) pairs snapped to grid nodes, drawn from the checkpoint set
    cps = sorted({grid.node_index(c) * grid.dt for c in sc.checkpoints}, reverse=True)
    pairs = [(t, s) for t in cps for s in cps if t >= s]
    eps_list = [0.0, sc.epsilon_ladder[0]] if sc.epsilon_ladder else [0.0]

    rows = []
    for j, h in enumerate(sc.hurst):
        w_ens = wiener_ensemble(grid, 1, seed + j, sc.replicates, threads=threads)
        for eps in eps_list:
            values = fbm_ensemble(w_ens, h, eps, 0)
            for t, s in pairs:
                nt, ns = grid.node_index(t), grid.node_index(s)
                prod = values[:, nt] * values[:, ns]
                mc = float(np.mean(prod))
                se = float(np.std(prod, ddof=1) / math.sqrt(len(prod)))
                disc = liouville_covariance_discrete(t, s, h, eps, grid)
                cont = liouville_covariance(t, s, h, eps)
                mand = mandelbrot_covariance(t, s, h) if h.H == 0.5 else ""
                rows.append((h.H, eps, t, s, mc, se, disc, cont, mand))
    digest = _write_csv(
        out / "covariance.csv",
        ["H", "epsilon", "t", "s", "mc", "mc_se", "discrete", "continuous", "mandelbrot"],
        rows,
    )
    return {"covariance.csv": digest}


COMMANDS = {
    "simulate-fbm": cmd_simulate_fbm,
    "anneal": cmd_anneal,
    "linearize": cmd_linearize,
    "converge": cmd_converge,
    "covcheck": cmd_covcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="franneal", description="Fractional annealing simulation toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.config)
    except (OSError, yaml.YAMLError, ScenarioError) as exc:
        print(f"error:scenario: {exc}", file=sys.stderr)
        return 1
    seed = scenario.master_seed if args.seed is None else args.seed
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        digests = COMMANDS[args.command](scenario, out, seed, args.threads)
        _write_manifest(out, scenario, args.command, seed, digests)
    except CommandError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
