"""World generation, synthetic trajectories, ground-truth paths, and scenario files.

All generation is a pure function of (seed, config) through numpy's PCG64
generator, so identical seeds reproduce identical worlds across runs and
platforms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .filters import FilterConfig
from .geometry import Point2, Polyline, split_polyline
from .motion import ControlInput, MotionLimits, NoiseParams, TerrainModel
from .navigator import NavConfig
from .planner import ObstacleMap, PlannerConfig
from .risk import DEFAULT_ZONE_WEIGHTS, RiskZoneConfig, SafePathBuffer
from .sensors import Landmark, LandmarkMap, SensorNoise

SYNTHETIC_DT = 0.05

# Seven landmark clusters on the 200 x 200 grid; members sit on a small
# pentagon around each centre so any point within ~54 m of a centre can see
# all five members inside the 60 m detection range.
DEFAULT_CLUSTERS = (
    (1, (40.0, 170.0)),
    (2, (100.0, 175.0)),
    (3, (150.0, 145.0)),
    (4, (35.0, 60.0)),
    (5, (110.0, 80.0)),
    (6, (45.0, 40.0)),
    (7, (140.0, 15.0)),
)
CLUSTER_MEMBER_RADIUS = 6.0

# Three path types with distinct origins and a common destination (cluster 3).
DEFAULT_PATHS = {
    "P1": [6, 5, 3],
    "P2": [4, 5, 3],
    "P3": [7, 5, 3],
}


class ScenarioError(ValueError):
    """Invalid scenario content or generation failure."""


@dataclass
class World:
    """Battlefield grid: landmark clusters, obstacles, hazards, terrain."""

    bounds: tuple[float, float]
    landmark_map: LandmarkMap
    obstacle_map: ObstacleMap
    terrain: TerrainModel
    seed: int

    @property
    def clusters(self):
        return self.landmark_map.clusters

    @property
    def landmarks(self):
        return list(self.landmark_map.landmarks.values())

    def cluster_centroid(self, cid: int) -> Point2:
        return self.landmark_map.cluster_by_id(cid).centroid


@dataclass
class SyntheticTrajectory:
    """Rows of (p_x, s_x, a_x, p_y, s_y, a_y, theta) at a fixed timestep."""

    records: np.ndarray
    dt: float = SYNTHETIC_DT

    def __post_init__(self) -> None:
        self.records = np.asarray(self.records, dtype=float)
        if self.records.ndim != 2 or self.records.shape[1] != 7 or len(self.records) < 2:
            raise ValueError("records must be (N >= 2, 7)")
        if not np.all(np.isfinite(self.records)):
            raise ValueError("records must be finite")

    @property
    def positions(self) -> np.ndarray:
        return self.records[:, [0, 3]]

    @property
    def speeds(self) -> np.ndarray:
        return np.hypot(self.records[:, 1], self.records[:, 4])

    @property
    def headings(self) -> np.ndarray:
        return self.records[:, 6]


def gen_synthetic(n_steps: int, seed: int, dt: float = SYNTHETIC_DT,
                  start: tuple[float, float] | None = None) -> SyntheticTrajectory:
    """Synthetic trajectory from sinusoidal acceleration and heading profiles.

    a(t) = 3 sin(4 pi t / T) is signed tangential acceleration (speed floors
    at zero) and theta(t) = (pi/2) sin(2 pi t / T) is taken exactly from the
    closed form at every timestep; speed and position follow by forward Euler
    integration. The seed only places the start point.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    total = n_steps * dt
    t = np.arange(n_steps) * dt
    accel = 3.0 * np.sin(4.0 * math.pi * t / total)
    theta = 0.5 * math.pi * np.sin(2.0 * math.pi * t / total)
    rng = np.random.default_rng(seed)
    if start is None:
        start = tuple(rng.uniform(40.0, 160.0, 2))
    speed = np.zeros(n_steps)
    pos = np.zeros((n_steps, 2))
    pos[0] = start
    for i in range(n_steps - 1):
        speed[i + 1] = max(speed[i] + accel[i] * dt, 0.0)
        pos[i + 1, 0] = pos[i, 0] + speed[i + 1] * dt * math.cos(theta[i + 1])
        pos[i + 1, 1] = pos[i, 1] + speed[i + 1] * dt * math.sin(theta[i + 1])
    records = np.column_stack([
        pos[:, 0], speed * np.cos(theta), accel * np.cos(theta),
        pos[:, 1], speed * np.sin(theta), accel * np.sin(theta), theta,
    ])
    return SyntheticTrajectory(records, dt)


def _default_landmarks() -> list[Landmark]:
    landmarks = []
    next_id = 1
    for cid, (cx, cy) in DEFAULT_CLUSTERS:
        # pentagon members, rotated per cluster for variety
        for j in range(5):
            ang = 2.0 * math.pi * j / 5 + 0.3 * cid
            landmarks.append(Landmark(
                id=next_id,
                position=Point2(cx + CLUSTER_MEMBER_RADIUS * math.cos(ang),
                                cy + CLUSTER_MEMBER_RADIUS * math.sin(ang)),
                cluster_id=cid))
            next_id += 1
    return landmarks


def gen_world(seed: int, n_obstacles: int = 25, n_hazards: int = 25,
              landmark_spec: list[Landmark] | None = None,
              bounds: tuple[float, float] = (200.0, 200.0),
              radius_range: tuple[float, float] = (2.0, 5.0),
              terrain: TerrainModel | None = None) -> World:
    """Generate a world with the requested obstacle/hazard counts.

    Obstacles and hazards are placed uniformly inside the bounds and
    rejection-sampled so no disc covers a cluster centroid; raises
    ScenarioError if the rejection budget runs out.
    """
    landmarks = landmark_spec if landmark_spec is not None else _default_landmarks()
    lmap = LandmarkMap(landmarks)
    for lm in landmarks:
        if not (0.0 <= lm.position.x <= bounds[0] and 0.0 <= lm.position.y <= bounds[1]):
            raise ScenarioError(f"landmark {lm.id} outside world bounds")
    centroids = np.array([(c.centroid.x, c.centroid.y) for c in lmap.clusters])

    rng = np.random.default_rng(seed)

    def draw(count: int) -> np.ndarray:
        out = []
        budget = 200 * count
        while len(out) < count:
            if budget <= 0:
                raise ScenarioError("placement rejection budget exhausted")
            budget -= 1
            x = rng.uniform(0.0, bounds[0])
            y = rng.uniform(0.0, bounds[1])
            r = rng.uniform(*radius_range)
            if np.min(np.hypot(centroids[:, 0] - x, centroids[:, 1] - y)) <= r:
                continue
            out.append((x, y, r))
        return np.array(out)

    omap = ObstacleMap(draw(n_obstacles) if n_obstacles else np.zeros((0, 3)),
                       draw(n_hazards) if n_hazards else np.zeros((0, 3)))
    return World(bounds=bounds, landmark_map=lmap, obstacle_map=omap,
                 terrain=terrain if terrain is not None else TerrainModel(),
                 seed=seed)


def build_ground_truth_path(world: World, cluster_sequence: list[int]) -> Polyline:
    """Polyline through the listed cluster centroids, in order."""
    if len(cluster_sequence) < 2:
        raise ScenarioError("need at least 2 clusters")
    for a, b in zip(cluster_sequence, cluster_sequence[1:]):
        if a == b:
            raise ScenarioError(f"repeated cluster id {a} in path")
    try:
        pts = [world.cluster_centroid(cid) for cid in cluster_sequence]
    except KeyError as exc:
        raise ScenarioError(str(exc)) from exc
    return Polyline(pts)


def build_safe_path(central: Polyline, half_width: float, segments_n: int,
                    zone_weights=DEFAULT_ZONE_WEIGHTS,
                    multiplicative: bool = False) -> SafePathBuffer:
    """Buffer around the central polyline: equal-width risk zones per side and
    equal-arc-length segments."""
    if half_width <= 0.0:
        raise ScenarioError("half_width must be > 0")
    zones = RiskZoneConfig.equal_zones(half_width, zone_weights, multiplicative)
    segments = tuple(split_polyline(central, segments_n))
    return SafePathBuffer(central=central, half_width=half_width,
                          segments=segments, zones=zones)


@dataclass
class Scenario:
    """A full simulation setup: world plus every configuration block."""

    world: World
    paths: dict[str, list[int]]
    buffer_half_width: float = 10.0
    buffer_segments: int = 4
    zone_weights: tuple[float, ...] = DEFAULT_ZONE_WEIGHTS
    process_noise: NoiseParams = field(default_factory=NoiseParams)
    sensor_noise: SensorNoise = field(default_factory=SensorNoise)
    limits: MotionLimits = field(default_factory=MotionLimits)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    jacobian_mode: str = "analytic"
    particle_count: int = 1000
    resample_threshold: float = 0.5
    cruise_speed: float = 3.0
    lookahead: float = 3.0
    subsegments: int = 5
    obstacle_check_radius: float = 12.0
    max_steps: int = 6000
    goal_radius: float = 1.0
    clearance: float = 1.0

    def path_names(self) -> list[str]:
        return list(self.paths)

    def central(self, path_name: str) -> Polyline:
        if path_name not in self.paths:
            raise ScenarioError(f"unknown path {path_name!r}")
        return build_ground_truth_path(self.world, self.paths[path_name])

    def safe_path(self, path_name: str) -> SafePathBuffer:
        return build_safe_path(self.central(path_name), self.buffer_half_width,
                               self.buffer_segments, self.zone_weights)

    def start_state(self, path_name: str):
        from .motion import MotionState
        central = self.central(path_name)
        p0, p1 = central.coords[0], central.coords[1]
        heading = math.atan2(p1[1] - p0[1], p1[0] - p0[0])
        return MotionState(Point2(float(p0[0]), float(p0[1])),
                           self.cruise_speed, heading)

    def filter_config(self) -> FilterConfig:
        return FilterConfig.from_noise(
            self.process_noise, self.sensor_noise, self.limits.dt,
            jacobian_mode=self.jacobian_mode, particle_count=self.particle_count,
            resample_threshold=self.resample_threshold)

    def nav_config(self, method: str) -> NavConfig:
        return NavConfig(
            method=method,
            default_command=ControlInput(v_desired=self.cruise_speed, delta_theta=0.0),
            subsegments_per_segment=self.subsegments,
            lookahead=self.lookahead,
            obstacle_check_radius=self.obstacle_check_radius,
            max_steps=self.max_steps,
            goal_radius=self.goal_radius,
            clearance=self.clearance,
        )

    # ---- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        w = self.world
        terrain = w.terrain
        if terrain.grid is None:
            terrain_d = {"mode": "constant", "tau": terrain.tau}
        else:
            terrain_d = {"mode": "grid", "origin": list(terrain.origin),
                         "cell_size": terrain.cell_size,
                         "values": terrain.grid.tolist()}
        pn = self.process_noise
        sn = self.sensor_noise
        return {
            "bounds": list(w.bounds),
            "seed": w.seed,
            "landmarks": [{"id": lm.id, "x": lm.position.x, "y": lm.position.y,
                           "cluster": lm.cluster_id} for lm in w.landmarks],
            "obstacles": [{"x": x, "y": y, "r": r}
                          for x, y, r in w.obstacle_map.obstacles],
            "hazards": [{"x": x, "y": y, "r": r}
                        for x, y, r in w.obstacle_map.hazards],
            "terrain": terrain_d,
            "paths": [{"name": name, "clusters": list(cids)}
                      for name, cids in self.paths.items()],
            "buffer": {"half_width": self.buffer_half_width,
                       "segments": self.buffer_segments,
                       "zone_weights": list(self.zone_weights)},
            "noise": {
                "process": {"sigma_x": pn.sigma_x, "sigma_y": pn.sigma_y,
                            "sigma_vx": pn.sigma_vx, "sigma_vy": pn.sigma_vy,
                            "sigma_ax": pn.sigma_ax, "sigma_ay": pn.sigma_ay,
                            "sigma_theta": pn.sigma_theta},
                "sensor": {"sigma_range": sn.sigma_range,
                           "sigma_fix_x": sn.sigma_fix_x,
                           "sigma_fix_y": sn.sigma_fix_y,
                           "sigma_imu_v": sn.sigma_imu_v,
                           "sigma_imu_theta": sn.sigma_imu_theta,
                           "detect_range": sn.detect_range},
            },
            "motion": {"a": self.limits.a, "d": self.limits.d, "m": self.limits.m,
                       "v_max": self.limits.v_max, "dt": self.limits.dt},
            "filter": {"jacobian": self.jacobian_mode,
                       "particles": self.particle_count,
                       "resample_threshold": self.resample_threshold},
            "planner": {"alpha": self.planner.alpha, "beta": self.planner.beta,
                        "max_iterations": self.planner.max_iterations,
                        "step_size": self.planner.step_size,
                        "goal_radius": self.planner.goal_radius,
                        "rewire_radius": self.planner.rewire_radius,
                        "goal_bias": self.planner.goal_bias},
            "nav": {"cruise_speed": self.cruise_speed, "lookahead": self.lookahead,
                    "subsegments": self.subsegments,
                    "obstacle_check_radius": self.obstacle_check_radius,
                    "max_steps": self.max_steps, "goal_radius": self.goal_radius,
                    "clearance": self.clearance},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        required = {"bounds", "seed", "landmarks", "obstacles", "hazards",
                    "terrain", "paths", "buffer", "noise", "motion", "filter",
                    "planner", "nav"}
        missing = required - set(data)
        unknown = set(data) - required
        if missing:
            raise ScenarioError(f"missing scenario fields: {sorted(missing)}")
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        try:
            landmarks = [Landmark(id=int(d["id"]),
                                  position=Point2(float(d["x"]), float(d["y"])),
                                  cluster_id=int(d["cluster"]))
                         for d in data["landmarks"]]
            omap = ObstacleMap.from_lists(
                [(d["x"], d["y"], d["r"]) for d in data["obstacles"]],
                [(d["x"], d["y"], d["r"]) for d in data["hazards"]])
            td = data["terrain"]
            if td["mode"] == "constant":
                terrain = TerrainModel(tau=float(td["tau"]))
            elif td["mode"] == "grid":
                terrain = TerrainModel(grid=np.asarray(td["values"], dtype=float),
                                       origin=tuple(td["origin"]),
                                       cell_size=float(td["cell_size"]))
            else:
                raise ScenarioError(f"unknown terrain mode {td['mode']!r}")
            world = World(bounds=tuple(float(v) for v in data["bounds"]),
                          landmark_map=LandmarkMap(landmarks),
                          obstacle_map=omap, terrain=terrain,
                          seed=int(data["seed"]))
            pn = data["noise"]["process"]
            sn = data["noise"]["sensor"]
            mo = data["motion"]
            fl = data["filter"]
            pl = data["planner"]
            nv = data["nav"]
            bf = data["buffer"]
            return cls(
                world=world,
                paths={p["name"]: [int(c) for c in p["clusters"]]
                       for p in data["paths"]},
                buffer_half_width=float(bf["half_width"]),
                buffer_segments=int(bf["segments"]),
                zone_weights=tuple(float(w) for w in bf["zone_weights"]),
                process_noise=NoiseParams(**{k: float(v) for k, v in pn.items()}),
                sensor_noise=SensorNoise(**{k: float(v) for k, v in sn.items()}),
                limits=MotionLimits(a=float(mo["a"]), d=float(mo["d"]),
                                    m=float(mo["m"]), v_max=float(mo["v_max"]),
                                    dt=float(mo["dt"])),
                planner=PlannerConfig(alpha=float(pl["alpha"]), beta=float(pl["beta"]),
                                      max_iterations=int(pl["max_iterations"]),
                                      step_size=float(pl["step_size"]),
                                      goal_radius=float(pl["goal_radius"]),
                                      rewire_radius=float(pl["rewire_radius"]),
                                      goal_bias=float(pl["goal_bias"])),
                jacobian_mode=str(fl["jacobian"]),
                particle_count=int(fl["particles"]),
                resample_threshold=float(fl["resample_threshold"]),
                cruise_speed=float(nv["cruise_speed"]),
                lookahead=float(nv["lookahead"]),
                subsegments=int(nv["subsegments"]),
                obstacle_check_radius=float(nv["obstacle_check_radius"]),
                max_steps=int(nv["max_steps"]),
                goal_radius=float(nv["goal_radius"]),
                clearance=float(nv["clearance"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"invalid scenario content: {exc}") from exc


def make_default_scenario(seed: int = 7) -> Scenario:
    """The bundled 200 x 200 scenario: seven clusters, 25 + 25 obstacles and
    hazards, three path types sharing the cluster-3 destination."""
    world = gen_world(seed)
    return Scenario(
        world=world,
        paths={name: list(cids) for name, cids in DEFAULT_PATHS.items()},
        buffer_half_width=6.0,
        process_noise=NoiseParams(sigma_x=0.04, sigma_y=0.04,
                                  sigma_vx=0.08, sigma_vy=0.08,
                                  sigma_ax=0.15, sigma_ay=0.15,
                                  sigma_theta=0.01),
        sensor_noise=SensorNoise(sigma_imu_v=0.05, sigma_imu_theta=0.01),
        limits=MotionLimits(m=3.0),
        planner=PlannerConfig(max_iterations=1200, step_size=4.0,
                              rewire_radius=8.0, goal_radius=2.0),
        lookahead=4.0,
    )


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"not valid JSON: {exc}") from exc
    return Scenario.from_dict(data)
