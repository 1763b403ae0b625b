"""Monte-Carlo trial execution, metric aggregation, and report export.

Per-trial seeds derive from the master seed through
numpy.random.SeedSequence(master_seed).generate_state(n), so a report is a
pure function of (scenario, arguments, master_seed); only the timing fields
vary between runs.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .filters import (FilterState, ekf_predict, ekf_update, init_particles,
                      pf_estimate, pf_step)
from .geometry import Point2, Polyline, polyline_length, resample_by_arclength
from .motion import ControlInput, MotionState, step
from .navigator import NavRecord, compute_control_input, navigate
from .risk import SafePathBuffer, TrajectoryMetrics, ade, awrs, fde, percent_error
from .scenario import Scenario, build_safe_path, gen_synthetic
from .sensors import PositionFix, measure_imu, measure_position

RESAMPLE_POINTS = 200
CSV_COLUMNS = ["method", "filter", "path", "ade", "fde", "awrs", "pct_err",
               "step_ms", "trials", "failures"]


@dataclass
class TrialReport:
    trial_id: int
    seed: int
    method: str
    filter_kind: str
    path_name: str
    metrics: TrajectoryMetrics | None
    outcome: str
    replans: int


@dataclass
class AggregateRow:
    """Mean metrics over the successful trials of one (method, filter, path)."""

    method: str
    filter_kind: str
    path_name: str
    ade: float
    fde: float
    awrs: float
    pct_err: float
    step_ms: float
    trials: int
    failures: int
    unreliable: bool = False

    def to_dict(self) -> dict:
        return {
            "method": self.method, "filter": self.filter_kind,
            "path": self.path_name, "ade": self.ade, "fde": self.fde,
            "awrs": self.awrs, "pct_err": self.pct_err, "step_ms": self.step_ms,
            "trials": self.trials, "failures": self.failures,
            "unreliable": self.unreliable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AggregateRow":
        return cls(method=d["method"], filter_kind=d["filter"],
                   path_name=d["path"], ade=d["ade"], fde=d["fde"],
                   awrs=d["awrs"], pct_err=d["pct_err"], step_ms=d["step_ms"],
                   trials=d["trials"], failures=d["failures"],
                   unreliable=d["unreliable"])


@dataclass
class AggregateReport:
    master_seed: int
    rows: list[AggregateRow] = field(default_factory=list)

    def row(self, method: str, filter_kind: str, path_name: str) -> AggregateRow:
        for r in self.rows:
            if (r.method, r.filter_kind, r.path_name) == (method, filter_kind, path_name):
                return r
        raise KeyError((method, filter_kind, path_name))

    @staticmethod
    def merge(reports: list["AggregateReport"]) -> "AggregateReport":
        if not reports:
            raise ValueError("nothing to merge")
        out = AggregateReport(master_seed=reports[0].master_seed)
        for rep in reports:
            out.rows.extend(rep.rows)
        return out


def trial_seeds(master_seed: int, n: int) -> np.ndarray:
    """Documented splitting rule: SeedSequence(master).generate_state(n)."""
    return np.random.SeedSequence(master_seed).generate_state(n, dtype=np.uint64)


def trajectory_metrics(points: np.ndarray, buffer: SafePathBuffer,
                       mean_step_ms: float,
                       resample_n: int = RESAMPLE_POINTS) -> TrajectoryMetrics:
    """Metrics of an estimated trajectory against the buffer's central path.

    Estimated and ground-truth trajectories are resampled by arc length to a
    common point count before the displacement errors; the risk score averages
    over the resampled estimate; percent error compares raw path lengths.
    """
    est_rs = resample_by_arclength(points, resample_n)
    truth_rs = resample_by_arclength(buffer.central.coords, resample_n)
    est_len = polyline_length(points)
    return TrajectoryMetrics(
        ade=ade(est_rs, truth_rs),
        fde=fde(est_rs, truth_rs),
        awrs=awrs(est_rs, buffer),
        percent_error=percent_error(est_len, buffer.central.length),
        mean_step_runtime_ms=mean_step_ms,
        trajectory_length=est_len,
    )


def run_single_trial(scenario: Scenario, method: str, filter_kind: str,
                     path_name: str, seed: int,
                     trial_id: int = 0) -> tuple[TrialReport, NavRecord]:
    """One navigation trial; metrics are computed whenever the record has
    at least one step."""
    rng = np.random.default_rng(seed)
    buffer = scenario.safe_path(path_name)
    record = navigate(
        start=scenario.start_state(path_name),
        buffer=buffer,
        world=scenario.world,
        cfg=scenario.nav_config(method),
        lim=scenario.limits,
        process_noise=scenario.process_noise,
        sensor_noise=scenario.sensor_noise,
        filter_cfg=scenario.filter_config(),
        planner_cfg=scenario.planner,
        rng=rng,
        filter_kind=filter_kind,
    )
    metrics = None
    if len(record) >= 1:
        metrics = trajectory_metrics(record.measured, buffer,
                                     float(record.step_ms.mean()))
    report = TrialReport(trial_id=trial_id, seed=int(seed), method=method,
                         filter_kind=filter_kind, path_name=path_name,
                         metrics=metrics, outcome=record.outcome,
                         replans=record.replans)
    return report, record


def _aggregate(trials: list[TrialReport], method: str, filter_kind: str,
               path_name: str) -> AggregateRow:
    """Order-independent mean over successful (non-aborted) trials."""
    good = [t for t in trials if t.outcome != "aborted" and t.metrics is not None]
    failures = len(trials) - len(good)
    if good:
        def mean(attr):
            return sum(getattr(t.metrics, attr) for t in good) / len(good)
        row = AggregateRow(method=method, filter_kind=filter_kind,
                           path_name=path_name,
                           ade=mean("ade"), fde=mean("fde"), awrs=mean("awrs"),
                           pct_err=mean("percent_error"),
                           step_ms=mean("mean_step_runtime_ms"),
                           trials=len(trials), failures=failures)
    else:
        row = AggregateRow(method=method, filter_kind=filter_kind,
                           path_name=path_name, ade=math.nan, fde=math.nan,
                           awrs=math.nan, pct_err=math.nan, step_ms=math.nan,
                           trials=len(trials), failures=failures)
    row.unreliable = failures > 0.5 * len(trials)
    return row


def run_trials(scenario: Scenario, method: str, filter_kind: str,
               path_name: str, n_trials: int, master_seed: int,
               trace_dir=None) -> AggregateReport:
    """Run independent navigation trials and aggregate their metrics."""
    seeds = trial_seeds(master_seed, n_trials)
    trials = []
    for i, seed in enumerate(seeds):
        report, record = run_single_trial(scenario, method, filter_kind,
                                          path_name, int(seed), trial_id=i)
        trials.append(report)
        if trace_dir is not None and len(record) > 0:
            record.to_csv(Path(trace_dir) / f"trial_{i:04d}.csv")
    row = _aggregate(trials, method, filter_kind, path_name)
    return AggregateReport(master_seed=master_seed, rows=[row])


# ---- filter-comparison (trajectory estimation) lane ------------------------


def _world_truth_controls(scenario: Scenario, path_name: str):
    """Waypoint-following control law along a path's central polyline."""
    central = scenario.central(path_name)
    waypoints = [Point2(float(x), float(y)) for x, y in central.coords[1:]]

    def control(truth: MotionState, wp_idx: int) -> tuple[ControlInput, int]:
        while wp_idx < len(waypoints) - 1 and \
                truth.position.distance_to(waypoints[wp_idx]) < 2.0:
            wp_idx += 1
        u = compute_control_input(truth, waypoints[wp_idx], scenario.limits)
        return ControlInput(v_desired=scenario.cruise_speed,
                            delta_theta=u.delta_theta), wp_idx

    start = scenario.start_state(path_name)
    n_steps = int(1.3 * central.length / (scenario.cruise_speed * scenario.limits.dt))
    return start, control, n_steps


def run_estimation_trial(scenario: Scenario, source: str, filter_kind: str,
                         seed: int, n_steps: int | None = None
                         ) -> tuple[TrajectoryMetrics, np.ndarray, np.ndarray]:
    """Track one noisy truth rollout with the selected filter.

    source is "synthetic" (sinusoidal-profile trajectory) or a path name
    (waypoint following along its central polyline). Returns the metrics of
    the estimated trajectory against the realized truth plus both point sets.
    """
    rng = np.random.default_rng(seed)
    lim = scenario.limits
    terrain = scenario.world.terrain
    fcfg = scenario.filter_config()

    if source == "synthetic":
        n = n_steps or 400
        ref = gen_synthetic(n + 1, seed=seed)
        start = MotionState(Point2(*ref.positions[0]), float(ref.speeds[0]),
                            float(ref.headings[0]))

        def control(truth, k):
            dth = float(ref.headings[k + 1] - ref.headings[k])
            return ControlInput(v_desired=float(ref.speeds[k + 1]),
                                delta_theta=dth), k
        steps = n
        world = None  # fixes come straight from truth + fix noise
    else:
        start, control, steps = _world_truth_controls(scenario, source)
        if n_steps is not None:
            steps = n_steps
        world = scenario.world

    sn = scenario.sensor_noise
    fs = FilterState(start.as_array(), fcfg.initial_covariance.copy())
    particles = init_particles(start.as_array(), fcfg, rng) \
        if filter_kind == "pf" else None

    truth = start
    truth_pts, est_pts = [], []
    step_ms = []
    wp_idx = 0
    for k in range(steps):
        u, wp_idx = control(truth, wp_idx if source != "synthetic" else k)
        truth = step(truth, u, lim, scenario.process_noise, terrain, rng)
        if world is not None:
            fix = measure_position(truth.position, world, sn, rng)
        else:
            fix = PositionFix(
                Point2(truth.position.x + rng.normal(0.0, sn.sigma_fix_x),
                       truth.position.y + rng.normal(0.0, sn.sigma_fix_y)),
                np.diag([sn.sigma_fix_x ** 2, sn.sigma_fix_y ** 2]))
        v_imu, th_imu = measure_imu(truth, sn, rng)
        t0 = time.perf_counter()
        if filter_kind == "ekf":
            fs = ekf_predict(fs, u, lim, terrain, fcfg)
            fs, _ = ekf_update(fs, fix, fcfg)
            fs.mean[2], fs.mean[3] = v_imu, th_imu
            est = fs.mean[:2].copy()
        else:
            particles = pf_step(particles, u, fix, lim, scenario.process_noise,
                                terrain, fcfg, rng)
            est = pf_estimate(particles)[:2]
        step_ms.append((time.perf_counter() - t0) * 1000.0)
        truth_pts.append((truth.position.x, truth.position.y))
        est_pts.append(tuple(est))

    truth_arr = np.array(truth_pts)
    est_arr = np.array(est_pts)
    buffer = build_safe_path(Polyline(truth_arr), scenario.buffer_half_width, 1,
                             scenario.zone_weights)
    metrics = TrajectoryMetrics(
        ade=ade(est_arr, truth_arr),
        fde=fde(est_arr, truth_arr),
        awrs=awrs(est_arr, buffer),
        percent_error=percent_error(polyline_length(est_arr),
                                    polyline_length(truth_arr)),
        mean_step_runtime_ms=float(np.mean(step_ms)),
        trajectory_length=polyline_length(est_arr),
    )
    return metrics, est_arr, truth_arr


def run_estimation_trials(scenario: Scenario, source: str, filter_kind: str,
                          n_trials: int, master_seed: int,
                          n_steps: int | None = None) -> AggregateReport:
    """Monte-Carlo filter-comparison lane (EKF vs PF trajectory tracking)."""
    seeds = trial_seeds(master_seed, n_trials)
    metrics = [run_estimation_trial(scenario, source, filter_kind, int(s),
                                    n_steps)[0] for s in seeds]
    n = len(metrics)
    row = AggregateRow(
        method="estimation", filter_kind=filter_kind, path_name=source,
        ade=sum(m.ade for m in metrics) / n,
        fde=sum(m.fde for m in metrics) / n,
        awrs=sum(m.awrs for m in metrics) / n,
        pct_err=sum(m.percent_error for m in metrics) / n,
        step_ms=sum(m.mean_step_runtime_ms for m in metrics) / n,
        trials=n, failures=0)
    return AggregateReport(master_seed=master_seed, rows=[row])


# ---- export -----------------------------------------------------------------


def export_report(report: AggregateReport, fmt: str, path) -> None:
    """Write a report as json (lossless round-trip) or csv (fixed columns)."""
    path = Path(path)
    if fmt == "json":
        data = {"master_seed": report.master_seed,
                "rows": [r.to_dict() for r in report.rows]}
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in report.rows:
                writer.writerow([r.method, r.filter_kind, r.path_name,
                                 repr(r.ade), repr(r.fde), repr(r.awrs),
                                 repr(r.pct_err), repr(r.step_ms),
                                 r.trials, r.failures])
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_report(path) -> AggregateReport:
    """Load a json report written by export_report."""
    with open(path) as fh:
        data = json.load(fh)
    return AggregateReport(master_seed=data["master_seed"],
                           rows=[AggregateRow.from_dict(d) for d in data["rows"]])
