"""safenav command line: scenario generation, Monte-Carlo runs, standalone
planning, and trajectory metrics.

Exit codes: 0 success, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .geometry import Polyline, polyline_length, resample_by_arclength
from .harness import RESAMPLE_POINTS, export_report, run_trials
from .planner import PlanningFailedError, plan
from .risk import ade, awrs, fde, percent_error
from .scenario import (ScenarioError, build_safe_path, load_scenario,
                       make_default_scenario, save_scenario)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _parse_xy(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    return float(parts[0]), float(parts[1])


def _load_trajectory(path: str) -> np.ndarray:
    """Read the first two numeric columns of a CSV (header optional)."""
    try:
        return np.loadtxt(path, delimiter=",", usecols=(0, 1), ndmin=2)
    except ValueError:
        return np.loadtxt(path, delimiter=",", usecols=(0, 1), skiprows=1,
                          ndmin=2)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safenav",
        description="GPS-denied safe-path navigation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-scenario", help="write the bundled scenario")
    p_gen.add_argument("--seed", type=int, default=7)
    p_gen.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="Monte-Carlo navigation trials")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--method", choices=["chull", "centroid"], required=True)
    p_run.add_argument("--filter", choices=["ekf", "pf"], default="ekf")
    p_run.add_argument("--path", required=True)
    p_run.add_argument("--trials", type=int, default=100)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--traces", action="store_true",
                       help="also write per-trial step CSVs")

    p_plan = sub.add_parser("plan", help="standalone risk-aware RRT* query")
    p_plan.add_argument("--scenario", required=True)
    p_plan.add_argument("--start", type=_parse_xy, required=True)
    p_plan.add_argument("--goal", type=_parse_xy, required=True)
    p_plan.add_argument("--beta", type=float, default=None)
    p_plan.add_argument("--path", default=None,
                        help="path whose buffer anchors the risk cost "
                             "(default: first path)")
    p_plan.add_argument("--seed", type=int, default=0)
    p_plan.add_argument("--out", required=True)

    p_met = sub.add_parser("metrics", help="metrics between two trajectory CSVs")
    p_met.add_argument("--truth", required=True)
    p_met.add_argument("--est", required=True)
    p_met.add_argument("--buffer-width", type=float, default=10.0)
    return parser


def _cmd_gen_scenario(args) -> int:
    scenario = make_default_scenario(seed=args.seed)
    save_scenario(scenario, args.out)
    print(f"wrote scenario (seed={args.seed}) to {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.path not in scenario.paths:
        raise ScenarioError(f"unknown path {args.path!r}; "
                            f"available: {scenario.path_names()}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_trials(scenario, args.method, args.filter, args.path,
                        args.trials, args.seed,
                        trace_dir=out_dir if args.traces else None)
    export_report(report, "json", out_dir / "report.json")
    export_report(report, "csv", out_dir / "report.csv")
    row = report.rows[0]
    print(f"{row.method}/{row.filter_kind}/{row.path_name}: "
          f"ADE {row.ade:.3f} m, FDE {row.fde:.3f} m, AWRS {row.awrs:.3f}, "
          f"pct_err {row.pct_err:.2f}%, step {row.step_ms:.2f} ms "
          f"({row.trials} trials, {row.failures} failures)")
    if row.unreliable:
        print("warning: > 50% of trials failed; aggregate flagged unreliable")
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    path_name = args.path or scenario.path_names()[0]
    buffer = scenario.safe_path(path_name)
    cfg = scenario.planner
    if args.beta is not None:
        from dataclasses import replace
        cfg = replace(cfg, beta=args.beta)
    rng = np.random.default_rng(args.seed)
    result = plan(np.array(args.start), np.array(args.goal),
                  scenario.world.obstacle_map, buffer, cfg, rng)
    payload = {
        "path": result.path.tolist(),
        "total_cost": result.total_cost,
        "length_cost": result.length_cost,
        "risk_cost": result.risk_cost,
        "iterations_used": result.iterations_used,
        "tree": {"nodes": result.tree_nodes.tolist(),
                 "parents": result.tree_parents.tolist()},
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    print(f"path with {len(result.path)} points, total cost {result.total_cost:.3f} "
          f"(length {result.length_cost:.3f}, risk {result.risk_cost:.3f})")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    truth = _load_trajectory(args.truth)
    est = _load_trajectory(args.est)
    if len(truth) < 2 or len(est) < 1:
        raise ScenarioError("trajectory files need >= 2 truth and >= 1 est points")
    est_rs = resample_by_arclength(est, RESAMPLE_POINTS)
    truth_rs = resample_by_arclength(truth, RESAMPLE_POINTS)
    buffer = build_safe_path(Polyline(truth), args.buffer_width, 1)
    out = {
        "ade": ade(est_rs, truth_rs),
        "fde": fde(est_rs, truth_rs),
        "awrs": awrs(est_rs, buffer),
        "percent_error": percent_error(polyline_length(est),
                                       polyline_length(truth)),
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_VALIDATION
    try:
        if args.command == "gen-scenario":
            return _cmd_gen_scenario(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "plan":
            return _cmd_plan(args)
        if args.command == "metrics":
            return _cmd_metrics(args)
        return EXIT_VALIDATION
    except (ScenarioError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (PlanningFailedError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
