"""Battlefield kinematics: rate-limited speed/heading updates, terrain delay, noisy stepping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Point2

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]. In-range values are returned unchanged."""
    if -math.pi < theta <= math.pi:
        return theta
    w = (theta + math.pi) % TWO_PI - math.pi
    return math.pi if w == -math.pi else w


def wrap_angle_array(theta: np.ndarray) -> np.ndarray:
    """Vectorized wrap_angle; in-range entries pass through bitwise unchanged."""
    theta = np.asarray(theta, dtype=float)
    w = (theta + np.pi) % TWO_PI - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    in_range = (theta > -np.pi) & (theta <= np.pi)
    return np.where(in_range, theta, w)


@dataclass(frozen=True)
class MotionState:
    """Pose of the moving entity: position (m), speed (m/s), heading (rad)."""

    position: Point2
    v: float
    theta: float

    def __post_init__(self) -> None:
        if self.v < 0.0:
            raise ValueError(f"speed must be >= 0, got {self.v}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.position.x, self.position.y, self.v, self.theta])

    @classmethod
    def from_array(cls, arr) -> "MotionState":
        return cls(Point2(float(arr[0]), float(arr[1])), float(arr[2]), float(arr[3]))


@dataclass(frozen=True)
class ControlInput:
    """Speed and heading commands. a_command is informational; acceleration is
    derived from v_desired through the rate-limited speed update."""

    v_desired: float
    delta_theta: float = 0.0
    a_command: float | None = None

    def __post_init__(self) -> None:
        if self.v_desired < 0.0:
            raise ValueError(f"v_desired must be >= 0, got {self.v_desired}")


@dataclass(frozen=True)
class MotionLimits:
    """Physical capability envelope of the unit."""

    a: float = 1.5       # accel capability, m/s^2
    d: float = 2.0       # decel capability, m/s^2
    m: float = 1.0       # maneuverability: max heading rate, rad/s
    v_max: float = 5.0   # m/s
    dt: float = 0.1      # s

    def __post_init__(self) -> None:
        for name in ("a", "d", "m", "v_max", "dt"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class NoiseParams:
    """Per-step zero-mean Gaussian process noise standard deviations."""

    sigma_x: float = 0.0
    sigma_y: float = 0.0
    sigma_vx: float = 0.0
    sigma_vy: float = 0.0
    sigma_ax: float = 0.0
    sigma_ay: float = 0.0
    sigma_theta: float = 0.0

    def __post_init__(self) -> None:
        for name in ("sigma_x", "sigma_y", "sigma_vx", "sigma_vy",
                     "sigma_ax", "sigma_ay", "sigma_theta"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def speed_sigma(self) -> float:
        """Per-axis speed noises collapsed onto the scalar speed state."""
        return max(self.sigma_vx, self.sigma_vy)

    @property
    def accel_sigma(self) -> float:
        """Per-axis acceleration noises collapsed onto the scalar speed state."""
        return max(self.sigma_ax, self.sigma_ay)

    @classmethod
    def zero(cls) -> "NoiseParams":
        return cls()


class TerrainModel:
    """Terrain-effect field tau(p) >= 0: extra meters of per-step travel delay.

    Either a constant, or a piecewise-constant grid sampled with clamped
    nearest-cell lookup.
    """

    def __init__(self, tau: float = 0.0, grid=None,
                 origin: tuple[float, float] = (0.0, 0.0), cell_size: float = 1.0):
        if grid is None:
            if tau < 0.0:
                raise ValueError("tau must be >= 0")
            self.tau = float(tau)
            self.grid = None
        else:
            arr = np.asarray(grid, dtype=float)
            if arr.ndim != 2 or np.any(arr < 0.0):
                raise ValueError("terrain grid must be 2-D with tau >= 0")
            if cell_size <= 0.0:
                raise ValueError("cell_size must be > 0")
            self.tau = 0.0
            self.grid = arr
            self.origin = (float(origin[0]), float(origin[1]))
            self.cell_size = float(cell_size)

    def tau_at(self, x: float, y: float) -> float:
        if self.grid is None:
            return self.tau
        ix = int((x - self.origin[0]) / self.cell_size)
        iy = int((y - self.origin[1]) / self.cell_size)
        iy = min(max(iy, 0), self.grid.shape[0] - 1)
        ix = min(max(ix, 0), self.grid.shape[1] - 1)
        return float(self.grid[iy, ix])

    def tau_at_batch(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        if self.grid is None:
            return np.full(len(xs), self.tau)
        ix = ((xs - self.origin[0]) / self.cell_size).astype(int)
        iy = ((ys - self.origin[1]) / self.cell_size).astype(int)
        iy = np.clip(iy, 0, self.grid.shape[0] - 1)
        ix = np.clip(ix, 0, self.grid.shape[1] - 1)
        return self.grid[iy, ix]

    @property
    def is_zero(self) -> bool:
        return self.grid is None and self.tau == 0.0


def update_velocity(v_t: float, u: ControlInput, lim: MotionLimits) -> float:
    """Rate-limited speed update toward the commanded speed."""
    if u.v_desired > v_t:
        out = min(v_t + lim.a * lim.dt, u.v_desired, lim.v_max)
    else:
        out = max(v_t - lim.d * lim.dt, u.v_desired, 0.0)
    return min(out, lim.v_max)


def update_heading(theta_t: float, u: ControlInput, lim: MotionLimits) -> float:
    """Heading update with the commanded change clipped to +/- m*dt."""
    bound = lim.m * lim.dt
    d = min(max(u.delta_theta, -bound), bound)
    return wrap_angle(theta_t + d)


def update_position(s: MotionState, lim: MotionLimits) -> Point2:
    """Linear position advance along the state's heading."""
    return Point2(s.position.x + s.v * lim.dt * math.cos(s.theta),
                  s.position.y + s.v * lim.dt * math.sin(s.theta))


def terrain_travel_time(p1: Point2, p2: Point2, v_c: float, terrain: TerrainModel) -> float:
    """Travel time between two points plus the terrain delay sampled at p1."""
    if v_c <= 0.0:
        raise ValueError("stalled entity: cruise speed must be > 0")
    dist = p1.distance_to(p2)
    return dist / v_c + terrain.tau_at(p1.x, p1.y) / v_c


def deterministic_step(s: MotionState, u: ControlInput, lim: MotionLimits,
                       terrain: TerrainModel) -> MotionState:
    """Noise-free state transition; the prediction model used by the filters.

    Displacement is v' * t_tau where t_tau = dt + tau/v', i.e. terrain delay
    manifests as extra traversal distance tau along the new heading. A stalled
    entity (v' == 0) does not move.
    """
    v1 = update_velocity(s.v, u, lim)
    th1 = update_heading(s.theta, u, lim)
    if v1 > 0.0:
        disp = v1 * lim.dt + terrain.tau_at(s.position.x, s.position.y)
    else:
        disp = 0.0
    return MotionState(
        Point2(s.position.x + disp * math.cos(th1), s.position.y + disp * math.sin(th1)),
        v1, th1)


def step(s: MotionState, u: ControlInput, lim: MotionLimits, noise: NoiseParams,
         terrain: TerrainModel, rng: np.random.Generator) -> MotionState:
    """One noisy motion update.

    Speed noise is applied before clamping to [0, v_max]; heading noise is
    applied after the clipped command. With all sigmas zero this reduces
    bitwise to deterministic_step. Draw order: eps_v, eps_a, eps_theta,
    eps_x, eps_y.
    """
    eps_v = rng.normal(0.0, noise.speed_sigma)
    eps_a = rng.normal(0.0, noise.accel_sigma)
    v1 = update_velocity(s.v, u, lim) + eps_v + eps_a * lim.dt
    v1 = min(max(v1, 0.0), lim.v_max)
    eps_th = rng.normal(0.0, noise.sigma_theta)
    th1 = wrap_angle(update_heading(s.theta, u, lim) + eps_th)
    if v1 > 0.0:
        disp = v1 * lim.dt + terrain.tau_at(s.position.x, s.position.y)
    else:
        disp = 0.0
    eps_x = rng.normal(0.0, noise.sigma_x)
    eps_y = rng.normal(0.0, noise.sigma_y)
    return MotionState(
        Point2(s.position.x + disp * math.cos(th1) + eps_x,
               s.position.y + disp * math.sin(th1) + eps_y),
        v1, th1)


def step_array(states: np.ndarray, u: ControlInput, lim: MotionLimits,
               noise: NoiseParams, terrain: TerrainModel,
               rng: np.random.Generator) -> np.ndarray:
    """Vectorized step() over an (N, 4) array of (x, y, v, theta) rows.

    Mirrors the scalar update formulas and noise draw order; used by the
    particle filter.
    """
    x, y, v, th = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    n = len(states)
    dt = lim.dt
    det_v = np.where(u.v_desired > v,
                     np.minimum(np.minimum(v + lim.a * dt, u.v_desired), lim.v_max),
                     np.maximum(np.maximum(v - lim.d * dt, u.v_desired), 0.0))
    det_v = np.minimum(det_v, lim.v_max)
    v1 = det_v + rng.normal(0.0, noise.speed_sigma, n) + rng.normal(0.0, noise.accel_sigma, n) * dt
    np.clip(v1, 0.0, lim.v_max, out=v1)
    bound = lim.m * dt
    dth = min(max(u.delta_theta, -bound), bound)
    th1 = wrap_angle_array(wrap_angle_array(th + dth) + rng.normal(0.0, noise.sigma_theta, n))
    tau = terrain.tau_at_batch(x, y)
    disp = np.where(v1 > 0.0, v1 * dt + tau, 0.0)
    x1 = x + disp * np.cos(th1) + rng.normal(0.0, noise.sigma_x, n)
    y1 = y + disp * np.sin(th1) + rng.normal(0.0, noise.sigma_y, n)
    return np.column_stack([x1, y1, v1, th1])
