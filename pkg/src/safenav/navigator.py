"""Corridor-keeping maneuver methods and the end-to-end navigation loop.

Two guidance methods steer the entity along the safe-path buffer: the hull
method accepts a predicted step only while it stays inside the convex hull of
the current or next corridor segment, and the centroid method steers toward
the nearest unvisited sub-segment centroid. The navigation loop couples
guidance with the noisy motion model, landmark fixes, the selected filter,
and risk-aware replanning around detected obstacles.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .filters import (FilterConfig, FilterState, ParticleSet, ekf_predict,
                      ekf_update, init_particles, pf_estimate, pf_step)
from .geometry import (ConvexPolygon, Point2, Polyline, centroid, convex_hull,
                       point_at_arc, point_in_polygon, project_onto_polyline,
                       split_polyline)
from .motion import (ControlInput, MotionLimits, MotionState, NoiseParams,
                     TerrainModel, deterministic_step, step, wrap_angle)
from .planner import (ObstacleMap, PlannerConfig, PlanningFailedError,
                      collision_free, plan, segment_circle_distances)
from .risk import SafePathBuffer, wrs
from .sensors import (LocalizationUnavailableError, SensorNoise,
                      measure_imu, measure_position)

METHODS = ("chull", "centroid")

# minimum forward arc distance of a hull-correction target, meters; larger
# values give shallower re-entry angles after a boundary correction
CORRECTION_MIN_FORWARD = 25.0


class NavigationAbort(RuntimeError):
    """Guidance cannot continue (entity lost the corridor)."""


@dataclass(frozen=True)
class NavConfig:
    """Knobs of the navigation loop and its guidance method."""

    method: str
    default_command: ControlInput
    subsegments_per_segment: int = 5
    lookahead: float = 3.0
    obstacle_check_radius: float = 12.0
    max_steps: int = 6000
    goal_radius: float = 1.0
    clearance: float = 1.0
    max_back_steps: int = 3

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be > 0")


@dataclass
class NavRecord:
    """Per-step log of one navigation trial.

    predicted/measured/truth rows are index-aligned; speeds/headings are the
    estimated values used for control. wrs holds the per-step risk score of
    the measured position against the central trajectory.
    """

    predicted: np.ndarray
    measured: np.ndarray
    truth: np.ndarray
    speeds: np.ndarray
    headings: np.ndarray
    wrs: np.ndarray
    step_ms: np.ndarray
    controls: list[ControlInput]
    replans: int
    outcome: str                 # reached | aborted | step-limit
    reason: str = ""
    buffer_violations: int = 0
    pf_degenerate_steps: int = 0

    def __len__(self) -> int:
        return len(self.measured)

    def to_csv(self, path) -> None:
        header = "step,truth_x,truth_y,measured_x,measured_y,predicted_x,predicted_y,v,theta,wrs"
        rows = np.column_stack([
            np.arange(len(self)), self.truth, self.measured, self.predicted,
            self.speeds, self.headings, self.wrs,
        ])
        np.savetxt(path, rows, delimiter=",", header=header, comments="",
                   fmt=["%d"] + ["%.9f"] * 9)


def compute_control_input(state: MotionState, target: Point2,
                          lim: MotionLimits) -> ControlInput:
    """Command holding the current speed and turning toward the target bearing."""
    dx = target.x - state.position.x
    dy = target.y - state.position.y
    if dx == 0.0 and dy == 0.0:
        return ControlInput(v_desired=state.v, delta_theta=0.0)
    bearing = math.atan2(dy, dx)
    return ControlInput(v_desired=state.v,
                        delta_theta=wrap_angle(bearing - state.theta))


def segment_hulls(buffer: SafePathBuffer) -> list[ConvexPolygon]:
    """Convex hull of each segment's corridor footprint.

    Segment polylines are collinear along straight legs, so the hull is taken
    over the segment points offset by +/- half_width along each edge normal.
    """
    hulls = []
    w = buffer.half_width
    for seg in buffer.segments:
        pts = seg.coords
        edges = pts[1:] - pts[:-1]
        norms = np.hypot(edges[:, 0], edges[:, 1])
        normals = np.column_stack([-edges[:, 1], edges[:, 0]]) / norms[:, None]
        corners = []
        for i, nrm in enumerate(normals):
            for p in (pts[i], pts[i + 1]):
                corners.append(p + w * nrm)
                corners.append(p - w * nrm)
        hulls.append(convex_hull(np.array(corners)))
    return hulls


class ChullGuidance:
    """Safety check via hull membership of the predicted position.

    Moves with the constant default command (desired speed, desired heading
    change) while the prediction stays inside the convex hull of the current
    or next corridor segment; otherwise recomputes the command toward the
    current/next segment centroid (whichever lies ahead of the entity), and
    as a last resort steps back toward the previous confirmed in-corridor
    position (bounded, then aborts).
    """

    def __init__(self, buffer: SafePathBuffer, lim: MotionLimits,
                 terrain: TerrainModel, cfg: NavConfig):
        self.buffer = buffer
        self.lim = lim
        self.terrain = terrain
        self.cfg = cfg
        self.hulls = segment_hulls(buffer)
        self.centroids = [centroid(seg.coords) for seg in buffer.segments]
        # arc position of each segment centroid, for the ahead-of-entity test
        self.centroid_arcs = [
            project_onto_polyline(c, buffer.central)[0] for c in self.centroids]
        # arc at which each segment starts
        seg_lens = [seg.length for seg in buffer.segments]
        self.seg_arcs = [sum(seg_lens[:i]) for i in range(len(seg_lens))]
        end = buffer.central.coords[-1]
        self.end = Point2(float(end[0]), float(end[1]))
        self.seg_idx = 0
        self.back_steps = 0
        self.recovering = False
        self.last_confirmed: Point2 | None = None

    def check_entry(self, p: Point2) -> None:
        if not any(point_in_polygon(p, h) for h in self.hulls):
            raise NavigationAbort("entity outside all corridor hulls at entry")
        self.last_confirmed = p

    def resync(self, p: Point2) -> None:
        """Advance the segment index after a detour moved the entity forward."""
        arc, _, _ = project_onto_polyline(p, self.buffer.central)
        for i in reversed(range(len(self.hulls))):
            if self.seg_arcs[i] <= arc:
                self.seg_idx = max(self.seg_idx, i)
                break
        self.last_confirmed = p

    def _accepted_index(self, p: Point2) -> int | None:
        if point_in_polygon(p, self.hulls[self.seg_idx]):
            return self.seg_idx
        if self.seg_idx + 1 < len(self.hulls) and \
                point_in_polygon(p, self.hulls[self.seg_idx + 1]):
            return self.seg_idx + 1
        return None

    def correction_target(self, est: MotionState) -> Point2:
        """Interior point of the current/next segment to steer back toward.

        Prefers the current segment's centroid, falling through to the next
        segment's centroid and finally the path end so the target stays
        comfortably ahead of the entity (shallow re-entry angles, no
        turning back near segment ends).
        """
        arc, _, _ = project_onto_polyline(est.position, self.buffer.central)
        cands = [self.centroids[self.seg_idx]]
        if self.seg_idx + 1 < len(self.centroids):
            cands.append(self.centroids[self.seg_idx + 1])
        cand_arcs = [self.centroid_arcs[self.seg_idx + i] for i in range(len(cands))]
        for target, target_arc in zip(cands, cand_arcs):
            if target_arc - arc >= CORRECTION_MIN_FORWARD:
                return target
        return self.end

    def step(self, est: MotionState) -> tuple[Point2, ControlInput]:
        if self.recovering and self._accepted_index(est.position) is not None:
            # back inside after a back-step episode: keep re-aiming at the
            # forward target until aligned, so the backward heading from the
            # recovery swing is not locked in by the default command
            self.back_steps = 0
            self.last_confirmed = est.position
            u2 = compute_control_input(est, self.correction_target(est), self.lim)
            if abs(u2.delta_theta) <= self.lim.m * self.lim.dt:
                self.recovering = False
            pred2 = deterministic_step(est, u2, self.lim, self.terrain)
            return pred2.position, u2

        u = self.cfg.default_command
        pred = deterministic_step(est, u, self.lim, self.terrain)
        idx = self._accepted_index(pred.position)
        if idx is not None:
            self.seg_idx = idx
            self.back_steps = 0
            self.last_confirmed = est.position
            return pred.position, u

        if self._accepted_index(est.position) is not None:
            # still inside the corridor: steer toward the segment centroid and
            # let the next step's check re-evaluate
            self.back_steps = 0
            u2 = compute_control_input(est, self.correction_target(est), self.lim)
            pred2 = deterministic_step(est, u2, self.lim, self.terrain)
            return pred2.position, u2

        # entity itself is outside every adjacent hull (boundary condition):
        # step back toward the previous confirmed in-corridor position,
        # braking while the required swing is large; only steps that neither
        # swing nor close in on the target count against the livelock bound
        self.recovering = True
        target = self.last_confirmed or self.centroids[self.seg_idx]
        dth = compute_control_input(est, target, self.lim).delta_theta
        v_back = 0.0 if abs(dth) > 0.25 * math.pi else self.cfg.default_command.v_desired
        u3 = ControlInput(v_desired=v_back, delta_theta=dth)
        pred3 = deterministic_step(est, u3, self.lim, self.terrain)
        closing_in = pred3.position.distance_to(target) \
            < est.position.distance_to(target) - 1e-12
        still_swinging = abs(u3.delta_theta) > self.lim.m * self.lim.dt
        if closing_in or still_swinging:
            self.back_steps = 0
        else:
            self.back_steps += 1
            if self.back_steps > self.cfg.max_back_steps:
                raise NavigationAbort(
                    f"corridor lost after {self.cfg.max_back_steps} back-steps")
        return pred3.position, u3


class CentroidGuidance:
    """Steer toward the nearest unvisited sub-segment centroid.

    Each buffer segment is split into sub-segments whose centroids form the
    waypoint chain; a centroid is consumed once the entity is within half the
    lookahead of it. After the last centroid, the central endpoint is the
    target. A step that predicts outside the buffer is logged, not aborted.
    """

    def __init__(self, buffer: SafePathBuffer, lim: MotionLimits,
                 terrain: TerrainModel, cfg: NavConfig):
        self.buffer = buffer
        self.lim = lim
        self.terrain = terrain
        self.cfg = cfg
        self.centroids: list[list[Point2]] = []
        self.centroid_arcs: list[list[float]] = []
        for seg in buffer.segments:
            pieces = split_polyline(seg, cfg.subsegments_per_segment)
            cents = [centroid(p.coords) for p in pieces]
            self.centroids.append(cents)
            self.centroid_arcs.append(
                [project_onto_polyline(c, buffer.central)[0] for c in cents])
        self.visited = [[False] * len(c) for c in self.centroids]
        self.seg_idx = 0
        self.violations = 0
        end = buffer.central.coords[-1]
        self._end = Point2(float(end[0]), float(end[1]))

    def resync(self, p: Point2) -> None:
        """Mark sub-segment centroids bypassed by a detour as visited."""
        arc, _, _ = project_onto_polyline(p, self.buffer.central)
        for i, arcs in enumerate(self.centroid_arcs):
            for j, a in enumerate(arcs):
                if a <= arc:
                    self.visited[i][j] = True

    def _next_target(self, p: Point2) -> Point2:
        consume = 0.5 * self.cfg.lookahead
        while True:
            while self.seg_idx < len(self.centroids) and all(self.visited[self.seg_idx]):
                self.seg_idx += 1
            if self.seg_idx >= len(self.centroids):
                return self._end
            cands = [(i, c) for i, c in enumerate(self.centroids[self.seg_idx])
                     if not self.visited[self.seg_idx][i]]
            i, c = min(cands, key=lambda ic: p.distance_to(ic[1]))
            if p.distance_to(c) <= consume:
                self.visited[self.seg_idx][i] = True
                continue
            return c

    def step(self, est: MotionState) -> tuple[Point2, ControlInput]:
        target = self._next_target(est.position)
        # speed command carries over from the ambient control input; pinning
        # it to the instantaneous speed would random-walk the speed to zero
        u = ControlInput(
            v_desired=self.cfg.default_command.v_desired,
            delta_theta=compute_control_input(est, target, self.lim).delta_theta)
        pred = deterministic_step(est, u, self.lim, self.terrain)
        if not self.buffer.contains(pred.position.as_array()):
            self.violations += 1
        return pred.position, u


def point_clear(p, omap: ObstacleMap) -> bool:
    """True iff the point lies outside every obstacle disc."""
    if len(omap.obstacles) == 0:
        return True
    xy = np.asarray(p, dtype=float).reshape(2)
    d = np.hypot(omap.obstacles[:, 0] - xy[0], omap.obstacles[:, 1] - xy[1])
    return bool(np.all(d > omap.obstacles[:, 2]))


def rejoin_point(est_pos: Point2, central, omap: ObstacleMap,
                 cfg: NavConfig) -> np.ndarray:
    """Detour goal: a clear point on the central path beyond the obstruction.

    Starts two detection radii ahead of the entity's arc position and slides
    forward until the candidate clears all (inflated) obstacle discs, falling
    back to the path end."""
    arc_now, _, _ = project_onto_polyline(est_pos, central)
    total = central.length
    arc = min(arc_now + 2.0 * cfg.obstacle_check_radius, total)
    while arc < total:
        cand = point_at_arc(central, arc)
        if point_clear(cand, omap):
            return cand
        arc = min(arc + 5.0, total)
    return point_at_arc(central, total)


def obstacle_detected(p: Point2, q: Point2, omap: ObstacleMap,
                      cfg: NavConfig) -> bool:
    """True if an obstacle within detection range intrudes on the motion corridor.

    Detection range gates by distance from the current position; the blocking
    condition is the obstacle disc intersecting the clearance corridor around
    the segment p -> q, or the entity already standing within two clearances
    of a disc.
    """
    if len(omap.obstacles) == 0:
        return False
    centers = omap.obstacles[:, :2]
    radii = omap.obstacles[:, 2]
    here = np.hypot(centers[:, 0] - p.x, centers[:, 1] - p.y)
    if np.any(here <= radii + 2.0 * cfg.clearance):
        return True
    in_range = here <= cfg.obstacle_check_radius
    if not np.any(in_range):
        return False
    d = segment_circle_distances(np.array([p.x, p.y]), np.array([q.x, q.y]),
                                 centers[in_range])
    return bool(np.any(d <= radii[in_range] + cfg.clearance))


def _empty_record(outcome: str, reason: str) -> NavRecord:
    z2 = np.zeros((0, 2))
    z1 = np.zeros(0)
    return NavRecord(predicted=z2, measured=z2, truth=z2, speeds=z1,
                     headings=z1, wrs=z1, step_ms=z1, controls=[],
                     replans=0, outcome=outcome, reason=reason)


def navigate(start: MotionState, buffer: SafePathBuffer, world, cfg: NavConfig,
             lim: MotionLimits, process_noise: NoiseParams,
             sensor_noise: SensorNoise, filter_cfg: FilterConfig,
             planner_cfg: PlannerConfig, rng: np.random.Generator,
             filter_kind: str = "ekf") -> NavRecord:
    """Run one navigation trial along the safe-path buffer.

    Each step: the guidance method proposes the next position and command from
    the current estimate; if an obstacle intrudes on the intended motion, a
    risk-aware detour is planned and followed waypoint by waypoint; the truth
    state advances through the noisy motion model; a landmark fix and IMU
    reading update the filter. The trial ends when the estimate reaches the
    final goal_radius of arc length while inside the corridor, aborts on
    localization/planning failure or corridor loss, or stops at max_steps.
    """
    if filter_kind not in ("ekf", "pf"):
        raise ValueError("filter_kind must be 'ekf' or 'pf'")
    central = buffer.central
    total_len = central.length
    terrain = world.terrain

    if cfg.method == "chull":
        guidance = ChullGuidance(buffer, lim, terrain, cfg)
    else:
        guidance = CentroidGuidance(buffer, lim, terrain, cfg)

    try:
        fix0 = measure_position(start.position, world, sensor_noise, rng)
    except LocalizationUnavailableError as exc:
        return _empty_record("aborted", str(exc))
    v0, th0 = measure_imu(start, sensor_noise, rng)
    mean0 = np.array([fix0.position.x, fix0.position.y, v0, th0])

    fs = FilterState(mean0.copy(), filter_cfg.initial_covariance.copy())
    particles: ParticleSet | None = None
    est_vec = mean0.copy()
    if filter_kind == "pf":
        particles = init_particles(mean0, filter_cfg, rng)

    if cfg.method == "chull":
        try:
            guidance.check_entry(start.position)
        except NavigationAbort as exc:
            return _empty_record("aborted", str(exc))

    imu_var = np.array([sensor_noise.sigma_imu_v ** 2,
                        sensor_noise.sigma_imu_theta ** 2])

    truth = start
    detour: deque[Point2] = deque()
    replans = 0
    pred_rows, meas_rows, truth_rows = [], [], []
    speeds, headings, wrs_rows, ms_rows = [], [], [], []
    controls: list[ControlInput] = []
    outcome, reason = "step-limit", ""

    for _ in range(cfg.max_steps):
        t0 = time.perf_counter()
        plan_s = 0.0
        est_state = MotionState(Point2(float(est_vec[0]), float(est_vec[1])),
                                max(float(est_vec[2]), 0.0), float(est_vec[3]))

        if detour:
            while detour and est_state.position.distance_to(detour[0]) <= 0.5 * cfg.lookahead:
                detour.popleft()
            if not detour:
                guidance.resync(est_state.position)
        if detour:
            target = detour[0]
            u = ControlInput(
                v_desired=cfg.default_command.v_desired,
                delta_theta=compute_control_input(est_state, target, lim).delta_theta)
            next_pos = deterministic_step(est_state, u, lim, terrain).position
        else:
            try:
                next_pos, u = guidance.step(est_state)
            except NavigationAbort as exc:
                outcome, reason = "aborted", str(exc)
                break
            # detection scans the intended route ahead, not just the next step
            arc_est, _, _ = project_onto_polyline(est_state.position, central)
            look = point_at_arc(
                central, min(arc_est + cfg.obstacle_check_radius, total_len))
            look_pt = Point2(float(look[0]), float(look[1]))
            if obstacle_detected(est_state.position, look_pt,
                                 world.obstacle_map, cfg):
                tp = time.perf_counter()
                inflated = world.obstacle_map.inflated(cfg.clearance)
                goal = rejoin_point(est_state.position, central, inflated, cfg)
                try:
                    result = plan(est_state.position.as_array(), goal,
                                  inflated, buffer, planner_cfg, rng)
                except PlanningFailedError as exc:
                    outcome, reason = "aborted", f"planning failed: {exc}"
                    break
                plan_s = time.perf_counter() - tp
                replans += 1
                detour = deque(Point2(float(x), float(y)) for x, y in result.path[1:])
                if detour:
                    target = detour[0]
                    u = ControlInput(
                        v_desired=cfg.default_command.v_desired,
                        delta_theta=compute_control_input(est_state, target, lim).delta_theta)
                    next_pos = deterministic_step(est_state, u, lim, terrain).position

        truth = step(truth, u, lim, process_noise, terrain, rng)
        try:
            fix = measure_position(truth.position, world, sensor_noise, rng)
        except LocalizationUnavailableError as exc:
            outcome, reason = "aborted", str(exc)
            break
        v_imu, th_imu = measure_imu(truth, sensor_noise, rng)

        if filter_kind == "ekf":
            fs = ekf_predict(fs, u, lim, terrain, filter_cfg)
            fs, _ = ekf_update(fs, fix, filter_cfg)
            # IMU reads speed/heading directly: pin those states and their
            # covariance rows to the reading
            fs.mean[2] = v_imu
            fs.mean[3] = th_imu
            fs.cov[2:, :] = 0.0
            fs.cov[:, 2:] = 0.0
            fs.cov[2, 2], fs.cov[3, 3] = imu_var
            est_vec = fs.mean.copy()
        else:
            particles = pf_step(particles, u, fix, lim, process_noise, terrain,
                                filter_cfg, rng)
            est_vec = pf_estimate(particles)
            est_vec[2] = v_imu
            est_vec[3] = th_imu

        step_ms = (time.perf_counter() - t0 - plan_s) * 1000.0
        meas_p = (float(est_vec[0]), float(est_vec[1]))
        arc, lateral, _ = project_onto_polyline(meas_p, central)
        pred_rows.append((next_pos.x, next_pos.y))
        meas_rows.append(meas_p)
        truth_rows.append((truth.position.x, truth.position.y))
        speeds.append(float(est_vec[2]))
        headings.append(float(est_vec[3]))
        wrs_rows.append(wrs(lateral, buffer.zones))
        ms_rows.append(step_ms)
        controls.append(u)

        if arc >= total_len - cfg.goal_radius and lateral <= buffer.half_width:
            outcome, reason = "reached", ""
            break

    return NavRecord(
        predicted=np.array(pred_rows).reshape(-1, 2),
        measured=np.array(meas_rows).reshape(-1, 2),
        truth=np.array(truth_rows).reshape(-1, 2),
        speeds=np.array(speeds), headings=np.array(headings),
        wrs=np.array(wrs_rows), step_ms=np.array(ms_rows),
        controls=controls, replans=replans, outcome=outcome, reason=reason,
        buffer_violations=getattr(guidance, "violations", 0),
        pf_degenerate_steps=(particles.degenerate_resets if particles else 0),
    )
