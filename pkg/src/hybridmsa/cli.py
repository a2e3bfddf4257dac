"""Configuration-driven experiment runner.

Reads a TOML config describing one of the benchmark experiments, runs the
requested study and writes plot-ready CSV plus a JSON summary:

* ``solve``   -- one solver run: convergence.csv, control.csv,
  trajectory.csv, summary.json
* ``sweep``   -- repeats the run over a list of grid sizes and reports the
  error-vs-N table with fitted log-log slopes: sweep.csv
* ``compare`` -- solver vs gradient-descent baseline at matched learning
  rate: compare.csv

Exit codes: 0 success, 1 solver failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import baseline, discs, oracle, solver
from .errors import ConfigError, OracleUnavailable, SolverError
from .ocp import ControlGrid

_KINDS = ("concentric", "general", "wall", "l1")

# Initial placements and cost weights of the benchmark experiments.
_SQRT2 = math.sqrt(2.0)
_PRESETS = {
    "concentric": dict(q1=(-2.0, -2.0), q2=(-1.0, -1.0), u0=(3.0, 3.0)),
    "general": dict(q1=(-1.0, -2.0), q2=(-1.0, -1.0), u0=(0.0, 3.0)),
    "wall": dict(
        q1=(-1.5 - _SQRT2 / 5.0, 0.1 - _SQRT2 / 5.0),
        q2=(-1.0, 0.6),
        u0=(3.0, 3.0),
        wall_b=1.0,
        wall_normal=(0.0, 1.0),
    ),
    "l1": dict(q1=(-1.0, -2.0), q2=(-1.0, -1.0), u0=(0.0, 3.0)),
}


class RunSetup:
    """Everything derived from one parsed config file."""

    def __init__(self, raw: dict):
        problem = raw.get("problem", {})
        params = raw.get("params", {})
        init = raw.get("init", {})

        kind = _require(problem, "problem", "kind")
        if kind not in _KINDS:
            raise ConfigError(f"[problem] kind must be one of {_KINDS}, got {kind!r}")
        self.kind = kind
        preset = _PRESETS[kind]

        epsilon = _require(params, "params", "epsilon")
        try:
            wall_cfg = None
            if kind == "wall" or "wall" in raw:
                wall_raw = raw.get("wall", {})
                wall_cfg = discs.WallConfig(
                    b=float(wall_raw.get("b", preset.get("wall_b", 1.0))),
                    normal=tuple(wall_raw.get("normal", preset.get("wall_normal", (0.0, 1.0)))),
                )
            self.cfg = discs.DiscWorldConfig(
                epsilon=float(epsilon),
                horizon=float(params.get("T", 1.0)),
                m1=float(params.get("m1", 1.0)),
                m2=float(params.get("m2", 1.0)),
                r1=float(params.get("r1", 0.2)),
                r2=float(params.get("r2", 0.2)),
                restitution=float(params.get("C_R", 1.0)),
                q1=tuple(problem.get("q1", preset["q1"])),
                q2=tuple(problem.get("q2", preset["q2"])),
                v1=tuple(problem.get("v1", (0.0, 0.0))),
                v2=tuple(problem.get("v2", (0.0, 0.0))),
                wall=wall_cfg,
                cost=discs.L1 if kind == "l1" else discs.QUADRATIC,
                u_max=float(params.get("u_M", 5.0 * _SQRT2)) if kind == "l1" else None,
            )
            self.n_steps = int(params.get("N", 480))
            if self.n_steps < 2:
                raise ValueError("[params] N must be at least 2")
            self.params = solver.SolverParams(
                alpha=float(params.get("alpha", 0.01)),
                delta=float(params.get("delta", 1e-3)),
                tau=float(params.get("tau", 0.05)),
                max_iters=int(params.get("max_iters", 50_000)),
                convergence=(
                    solver.COST_STAGNATION if kind == "l1" else solver.HU_NORM
                ),
                stagnation_tol=float(params.get("delta_J", 1e-9)),
            )
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err)) from err
        self.omega_fraction = float(params.get("omega_fraction", 0.05))
        self.u0_constant = np.asarray(init.get("u0_constant", preset["u0"]), dtype=float)

        compare = raw.get("compare", {})
        if "N" in compare and int(compare["N"]) != self.n_steps:
            raise ConfigError(
                "[compare] N must match [params] N (both methods share the grid)"
            )

    def initial_control(self, n_steps=None) -> ControlGrid:
        return ControlGrid.constant(
            self.u0_constant, n_steps or self.n_steps, self.cfg.horizon
        )

    def reference(self):
        """Oracle solution, or None for setups without one."""
        try:
            return oracle.solve_experiment(self.cfg, self.kind)
        except OracleUnavailable:
            return None

    def error_fn(self, ref, n_steps):
        """Distance of a control iterate to the reference, as a semi-norm."""
        omega = self.omega_fraction * self.cfg.horizon
        times = ref.collision_times()
        grid_t = np.arange(n_steps) * (self.cfg.horizon / n_steps)
        ref_samples = ref.control_at(grid_t)

        def err(u: ControlGrid) -> float:
            return discs.seminorm(u.values - ref_samples, self.cfg.horizon, times, omega)

        return err


def _require(table: dict, table_name: str, key: str):
    if key not in table:
        raise ConfigError(f"missing required field [{table_name}] {key}")
    return table[key]


def load_config(path: str) -> RunSetup:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config parse error in {path}: {err}")
    return RunSetup(raw)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def run_solve(setup: RunSetup, out_dir: Path) -> solver.SolveReport:
    problem = discs.build_problem(setup.cfg)
    x0 = discs.initial_state(setup.cfg)
    ref = setup.reference()
    err_fn = setup.error_fn(ref, setup.n_steps) if ref else None
    report = solver.solve(problem, x0, setup.initial_control(), setup.params, err_fn)

    dt = setup.cfg.horizon / setup.n_steps
    rows = []
    for pos, k in enumerate(report.iters):
        err_u = report.err_series[pos] if err_fn else None
        err_j = abs(report.cost_series[pos] - ref.cost) if ref else None
        rows.append((k, report.cost_series[pos], report.hu_series[pos], err_u, err_j))
    _write_csv(out_dir / "convergence.csv", ("iter", "J", "hu_norm", "err_u_seminorm", "err_J"), rows)

    grid_t = np.arange(setup.n_steps) * dt
    ref_u = ref.control_at(grid_t) if ref else None
    rows = []
    for n, t in enumerate(grid_t):
        ux, uy = report.control.values[n]
        opt = (ref_u[n][0], ref_u[n][1]) if ref is not None else (None, None)
        rows.append((t, ux, uy, *opt))
    _write_csv(out_dir / "control.csv", ("t", "ux", "uy", "ux_opt", "uy_opt"), rows)

    flags = {rec.index for rec in report.trajectory.collisions}
    rows = [
        (n * dt, *report.trajectory.states[n], 1 if n in flags else 0)
        for n in range(setup.n_steps + 1)
    ]
    _write_csv(
        out_dir / "trajectory.csv",
        ("t", "q1x", "q1y", "q2x", "q2y", "v1x", "v1y", "v2x", "v2y", "collision"),
        rows,
    )

    summary = {
        "kind": setup.kind,
        "N": setup.n_steps,
        "converged": report.converged,
        "iterations": report.iterations,
        "final_J": report.cost,
        "final_hu_norm": report.hu_norm,
        "collision_times": report.trajectory.collision_times(dt),
        "collision_manifolds": [rec.manifold_id for rec in report.trajectory.collisions],
        "stability_margins": [
            {
                "collision_index": rec.collision_index,
                "manifold_id": rec.manifold_id,
                "v_minus": rec.v_minus,
                "m_jump": rec.m_jump,
                "margin": rec.margin,
                "stable": rec.stable,
            }
            for rec in report.stability
        ],
    }
    if ref is not None:
        summary["oracle_J"] = ref.cost
        summary["oracle_collision_times"] = ref.collision_times()
        summary["err_J"] = abs(report.cost - ref.cost)
        summary["err_u_seminorm"] = report.err_series[-1] if report.err_series else None
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def run_sweep(setup: RunSetup, n_list: list[int], out_dir: Path) -> None:
    ref = setup.reference()
    if ref is None:
        raise OracleUnavailable(
            f"sweep needs a reference solution; none exists for kind {setup.kind!r}"
        )
    problem = discs.build_problem(setup.cfg)
    x0 = discs.initial_state(setup.cfg)

    rows = []
    for n_steps in sorted(n_list):
        report = solver.solve(
            problem, x0, setup.initial_control(n_steps), setup.params,
            setup.error_fn(ref, n_steps),
        )
        dt = setup.cfg.horizon / n_steps
        times = report.trajectory.collision_times(dt)
        err_s = abs(times[0] - ref.collision_time) if times else math.nan
        rows.append((n_steps, err_s, report.err_series[-1], abs(report.cost - ref.cost)))

    slopes = [None, None, None]
    if len(rows) >= 2:
        logn = np.log([r[0] for r in rows])
        for col in range(3):
            vals = np.asarray([r[col + 1] for r in rows], dtype=float)
            if np.all(np.isfinite(vals)) and np.all(vals > 0.0):
                slopes[col] = float(np.polyfit(logn, np.log(vals), 1)[0])
    out_rows = rows + [("slope", *slopes)]
    _write_csv(out_dir / "sweep.csv", ("N", "err_s", "err_u", "err_J"), out_rows)


def run_compare(setup: RunSetup, out_dir: Path) -> None:
    if setup.kind == "l1":
        raise ConfigError("compare requires the quadratic cost")
    ref = setup.reference()
    problem = discs.build_problem(setup.cfg)
    x0 = discs.initial_state(setup.cfg)
    err_fn = setup.error_fn(ref, setup.n_steps) if ref else None

    msa = solver.solve(problem, x0, setup.initial_control(), setup.params, err_fn)
    gd = baseline.gd_solve(
        problem, x0, setup.initial_control(),
        iters=msa.iterations, alpha=setup.params.alpha,
        epsilon=setup.cfg.epsilon, error_fn=err_fn,
    )

    by_iter_gd = dict(zip(gd.iters, range(len(gd.iters))))
    rows = []
    for pos, k in enumerate(msa.iters):
        gpos = by_iter_gd.get(k)
        rows.append(
            (
                k,
                msa.cost_series[pos],
                gd.cost_series[gpos] if gpos is not None else None,
                msa.err_series[pos] if err_fn else None,
                gd.err_series[gpos] if (err_fn and gpos is not None) else None,
            )
        )
    _write_csv(out_dir / "compare.csv", ("iter", "J_msa", "J_gd", "err_u_msa", "err_u_gd"), rows)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hybridmsa", description="collision optimal-control experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("solve", "run the sweep solver once and dump its artifacts"),
        ("sweep", "repeat a run over several grid sizes and fit error slopes"),
        ("compare", "solver vs gradient-descent baseline at matched rate"),
    ):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("--config", required=True, help="TOML experiment config")
        cmd.add_argument("--out-dir", default=".", help="artifact directory")
        cmd.add_argument("--max-iters", type=int, default=None, help="override iteration cap")
        if name == "sweep":
            cmd.add_argument(
                "--n-list", required=True,
                help="comma-separated grid sizes, e.g. 60,120,240,480,960",
            )
    args = parser.parse_args(argv)

    try:
        setup = load_config(args.config)
        if args.max_iters is not None:
            setup.params.max_iters = args.max_iters
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            run_solve(setup, out_dir)
        elif args.command == "sweep":
            try:
                n_list = [int(tok) for tok in args.n_list.split(",") if tok.strip()]
            except ValueError:
                raise ConfigError(f"bad --n-list value: {args.n_list!r}")
            if not n_list:
                raise ConfigError("--n-list is empty")
            run_sweep(setup, n_list, out_dir)
        else:
            run_compare(setup, out_dir)
    except (ConfigError, OracleUnavailable) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
