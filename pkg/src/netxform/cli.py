"""Command-line entry point: feasibility checks, weight synthesis, simulation,
and the two worked scenarios.

Exit codes: 0 success, 1 usage or malformed input, 2 infeasible problem,
3 solver did not converge (diagnostics are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import csvio
from .dynamics import propagate_state_through, simulation_steps
from .graph import GraphError, graph_from_json_dict, mask
from .lie_algebra import check_feasible
from .optimal_control import (BvpProblem, OptimalControlError,
                              homotopy_singularity_scan, solve_bvp,
                              solve_with_waypoints)
from .scenarios import (DensifyScenario, ScenarioError, SwapScenario,
                        run_densify, run_swap)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NOT_CONVERGED = 3


class ConfigError(ValueError):
    """Malformed configuration file."""


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config missing required field {key!r}")
    return cfg[key]


def _matrix(value, name: str) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r} is not a numeric matrix: {exc}") from exc
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"field {name!r} must be a square row-major matrix")
    return M


def _solver_params(cfg: dict, args, max_iter_default: int = 50) -> dict:
    solver = cfg.get("solver", {})
    if not isinstance(solver, dict):
        raise ConfigError("field 'solver' must be an object")
    params = {
        "steps": int(solver.get("steps", 200)),
        "newton_tol": float(solver.get("newton_tol", 1e-8)),
        "max_iter": int(solver.get("max_iter", max_iter_default)),
        "restarts": int(solver.get("restarts", 8)),
        "seed": int(solver.get("seed", 0)),
    }
    if getattr(args, "seed", None) is not None:
        params["seed"] = args.seed
    if getattr(args, "steps", None) is not None:
        params["steps"] = args.steps
    return params


def _parse_problem(cfg: dict, args):
    try:
        g = graph_from_json_dict(_require(cfg, "graph"))
    except GraphError as exc:
        raise ConfigError(str(exc)) from exc
    target = _matrix(_require(cfg, "target"), "target")
    if target.shape[0] != g.n:
        raise ConfigError(f"target is {target.shape[0]}x{target.shape[1]} "
                          f"but the graph has {g.n} nodes")
    t0 = float(cfg.get("t0", 0.0))
    tf = float(cfg.get("tf", 1.0))
    waypoints = [_matrix(W, f"waypoints[{k}]") for k, W in enumerate(cfg.get("waypoints", []))]
    return g, target, t0, tf, waypoints, _solver_params(cfg, args)


def write_solution_bundle(sol, outdir: Path) -> None:
    """Emit schedule.csv / transition.csv / costate.csv / solution.json."""
    outdir.mkdir(parents=True, exist_ok=True)
    segs = sol.segments()
    csvio.write_schedule_csv(outdir / "schedule.csv", [s.schedule for s in segs])

    n = segs[0].X_seq.shape[1]
    B = np.eye(n)
    grids, mats = [], []
    cost_grids, cost_mats = [], []
    for idx, s in enumerate(segs):
        Xg = s.X_seq @ B
        B = s.X_seq[-1] @ B
        g = s.grid
        if idx:
            g, Xg = g[1:], Xg[1:]
        grids.append(g)
        mats.append(Xg)
        cost_grids.append(s.grid)
        cost_mats.append(s.lambda_seq)
    csvio.write_matrix_trajectory_csv(outdir / "transition.csv",
                                      np.concatenate(grids), np.concatenate(mats), prefix="X")
    csvio.write_matrix_trajectory_csv(outdir / "costate.csv",
                                      np.concatenate(cost_grids), np.concatenate(cost_mats),
                                      prefix="lambda")
    with open(outdir / "solution.json", "w") as fh:
        json.dump(sol.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_check(args) -> int:
    cfg = _load_config(args.config)
    g, target, _, _, _, _ = _parse_problem(cfg, args)
    report = check_feasible(g, target)
    print(json.dumps(report.to_json_dict(), sort_keys=True))
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    g, target, t0, tf, waypoints, params = _parse_problem(cfg, args)
    report = check_feasible(g, target)
    if not report.feasible:
        print(f"infeasible: {report.reason}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if not waypoints:
        min_det, argmin_s = homotopy_singularity_scan(target)
        if min_det < 0.1:
            print(f"warning: direct homotopy from I to the target is nearly singular "
                  f"(min |det| = {min_det:.3e} at s = {argmin_s}); "
                  f"consider supplying waypoints", file=sys.stderr)
    prob = BvpProblem(graph=g, target=target, t0=t0, tf=tf, **params)
    sol = solve_with_waypoints(prob, waypoints) if waypoints else solve_bvp(prob)
    write_solution_bundle(sol, Path(args.out))
    if not sol.converged:
        print(f"solver did not converge (residual {sol.residual_norm:.3e}); "
              f"diagnostics written to {args.out}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _parse_xi(args, n: int) -> np.ndarray:
    if args.xi is not None:
        try:
            xi = np.array([float(v) for v in args.xi.split(",")])
        except ValueError as exc:
            raise ConfigError(f"bad --xi value: {exc}") from exc
    elif args.xi_file is not None:
        try:
            xi = np.loadtxt(args.xi_file, delimiter=",", ndmin=1)
        except OSError as exc:
            raise ConfigError(f"cannot read --xi-file: {exc}") from exc
    else:
        raise ConfigError("simulate needs --xi or --xi-file")
    if xi.shape != (n,):
        raise ConfigError(f"initial state has {xi.size} entries, schedule expects {n}")
    return xi


def cmd_simulate(args) -> int:
    schedules = csvio.read_schedule_csv(args.schedule)
    n = schedules[0].n
    if args.config is not None:
        cfg = _load_config(args.config)
        g = graph_from_json_dict(_require(cfg, "graph"))
        if not np.array_equal(mask(g).entries, schedules[0].mask.entries):
            raise ConfigError("schedule sparsity pattern does not match the graph in --config")
    xi = _parse_xi(args, n)
    # default step count tracks the schedule grid (see simulation_steps)
    steps = args.steps if args.steps is not None else simulation_steps(schedules[0])
    grid, xs = propagate_state_through(schedules, xi, steps)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    csvio.write_vector_trajectory_csv(outdir / "nodes.csv", grid, xs)
    return EXIT_OK


def cmd_scenario(args) -> int:
    cfg = _load_config(args.config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.kind == "densify":
        try:
            scen = DensifyScenario(
                sparse_graph=graph_from_json_dict(_require(cfg, "sparse_graph")),
                dense_graph=graph_from_json_dict(_require(cfg, "dense_graph")),
                t0=float(cfg.get("t0", 0.0)), tf=float(cfg.get("tf", 1.0)),
                initial_state=(np.array(cfg["initial_state"], dtype=float)
                               if "initial_state" in cfg else None))
        except (GraphError, ScenarioError) as exc:
            raise ConfigError(str(exc)) from exc
        # waypoint segment solves need a larger budget than the direct default
        report = run_densify(scen, **_solver_params(cfg, args, max_iter_default=300))
        csvio.write_columns_csv(outdir / "errors.csv",
                                ["t", "err_sparse", "err_dense", "err_synth"],
                                [report.grid, report.err_sparse,
                                 report.err_dense, report.err_synth])
    elif args.kind == "swap":
        try:
            scen = SwapScenario(
                graph=graph_from_json_dict(_require(cfg, "graph")),
                pairs=tuple(tuple(int(v) for v in p) for p in _require(cfg, "pairs")),
                waypoints=tuple(_matrix(W, f"waypoints[{k}]")
                                for k, W in enumerate(cfg.get("waypoints", []))),
                initial_state=(np.array(cfg["initial_state"], dtype=float)
                               if "initial_state" in cfg else None),
                t0=float(cfg.get("t0", 0.0)), tf=float(cfg.get("tf", 1.0)))
        except (GraphError, ScenarioError) as exc:
            raise ConfigError(str(exc)) from exc
        report = run_swap(scen, **_solver_params(cfg, args))
    else:
        raise ConfigError(f"unknown scenario kind {args.kind!r}")
    csvio.write_vector_trajectory_csv(outdir / "nodes.csv", report.grid, report.node_states)
    write_solution_bundle(report.solution, outdir)
    return EXIT_OK if report.solution.converged else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="netxform",
        description="Decide, synthesize, and simulate local interaction weights "
                    "that make a network compute a global linear transformation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default="netxform_out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override config seed")
        sp.add_argument("--steps", type=int, default=None, help="override integration steps")

    sp = sub.add_parser("check", help="feasibility gate for a target matrix")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("solve", help="synthesize the optimal weight schedule")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="run node states through an emitted schedule")
    sp.add_argument("--schedule", required=True, help="schedule.csv path")
    sp.add_argument("--xi", default=None, help="comma-separated initial state")
    sp.add_argument("--xi-file", default=None, help="file with the initial state")
    sp.add_argument("--config", default=None, help="optional graph config to validate against")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("scenario", help="run a built-in scenario")
    sp.add_argument("kind", choices=["densify", "swap"])
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, GraphError, ScenarioError, csvio.CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OptimalControlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE if "infeasible" in str(exc) else EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
