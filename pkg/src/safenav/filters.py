"""EKF and bootstrap particle filter over the battlefield motion model.

State vector is (x, y, v, theta); position fixes observe (x, y) only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point2
from .motion import (ControlInput, MotionLimits, MotionState, NoiseParams,
                     TerrainModel, deterministic_step, step_array, wrap_angle,
                     wrap_angle_array)
from .sensors import PositionFix, SensorNoise

# Measurement model: H selects the position components of the state.
H_OBS = np.array([[1.0, 0.0, 0.0, 0.0],
                  [0.0, 1.0, 0.0, 0.0]])

# Floor for the measurement covariance so S stays invertible even in
# noise-free scenarios.
R_FLOOR = 1e-12


class FilterError(RuntimeError):
    """Numerical failure inside a filter update (e.g. singular residual covariance)."""


@dataclass
class FilterState:
    """Gaussian belief: mean (x, y, v, theta), covariance, and step index."""

    mean: np.ndarray
    cov: np.ndarray
    k: int = 0

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(4)
        self.cov = np.asarray(self.cov, dtype=float).reshape(4, 4)
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-9:
            raise ValueError("covariance must be symmetric")

    @property
    def position(self) -> Point2:
        return Point2(float(self.mean[0]), float(self.mean[1]))

    def as_motion_state(self) -> MotionState:
        return MotionState(self.position, max(float(self.mean[2]), 0.0),
                           float(self.mean[3]))


@dataclass
class FilterConfig:
    """Process/measurement covariances and filter knobs."""

    q: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)))
    r: np.ndarray = field(default_factory=lambda: np.eye(2) * R_FLOOR)
    jacobian_mode: str = "analytic"   # or "finite-difference"
    particle_count: int = 1000
    resample_threshold: float = 0.5
    initial_covariance: np.ndarray = field(
        default_factory=lambda: np.diag([0.25, 0.25, 0.04, 0.01]))

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float).reshape(4, 4)
        self.r = np.asarray(self.r, dtype=float).reshape(2, 2)
        self.initial_covariance = np.asarray(self.initial_covariance, dtype=float).reshape(4, 4)
        if self.jacobian_mode not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")
        if self.particle_count < 10:
            raise ValueError("particle_count must be >= 10")
        for mat in (self.q, self.r):
            if np.any(np.linalg.eigvalsh(0.5 * (mat + mat.T)) < -1e-12):
                raise ValueError("Q and R must be PSD")

    @classmethod
    def from_noise(cls, process: NoiseParams, sensor: SensorNoise, dt: float,
                   **kwargs) -> "FilterConfig":
        """Derive Q from the process sigmas and R from the fix sigmas."""
        sv2 = process.speed_sigma ** 2 + (process.accel_sigma * dt) ** 2
        q = np.diag([process.sigma_x ** 2, process.sigma_y ** 2,
                     sv2, process.sigma_theta ** 2])
        r = np.diag([max(sensor.sigma_fix_x ** 2, R_FLOOR),
                     max(sensor.sigma_fix_y ** 2, R_FLOOR)])
        return cls(q=q, r=r, **kwargs)


@dataclass
class EkfUpdateTrace:
    """Residual, residual covariance and gain of one measurement update."""

    residual: np.ndarray
    residual_cov: np.ndarray
    gain: np.ndarray


def transition(mean: np.ndarray, u: ControlInput, lim: MotionLimits,
               terrain: TerrainModel) -> np.ndarray:
    """Deterministic motion-model transition on a (4,) state vector."""
    s = MotionState(Point2(float(mean[0]), float(mean[1])),
                    max(float(mean[2]), 0.0), float(mean[3]))
    nxt = deterministic_step(s, u, lim, terrain)
    return nxt.as_array()


def jacobian_analytic(mean: np.ndarray, u: ControlInput, lim: MotionLimits,
                      terrain: TerrainModel) -> np.ndarray:
    """Jacobian of the deterministic transition at the given state.

    Derived from the branch structure of the speed/heading updates; at branch
    boundaries the sub-gradient of the active branch is used. The terrain
    field is piecewise constant, so its spatial gradient is taken as zero.
    """
    x, y, v, theta = (float(mean[0]), float(mean[1]),
                      max(float(mean[2]), 0.0), float(mean[3]))
    dt = lim.dt
    if u.v_desired > v:
        cand = v + lim.a * dt
        v1 = min(min(cand, u.v_desired), lim.v_max)
    else:
        cand = v - lim.d * dt
        v1 = max(max(cand, u.v_desired), 0.0)
    v1 = min(v1, lim.v_max)
    dv = 1.0 if v1 == cand else 0.0
    bound = lim.m * dt
    dth = min(max(u.delta_theta, -bound), bound)
    th1 = wrap_angle(theta + dth)
    if v1 > 0.0:
        disp = v1 * dt + terrain.tau_at(x, y)
        ddisp_dv = dt * dv
    else:
        disp = 0.0
        ddisp_dv = 0.0
    c, s = math.cos(th1), math.sin(th1)
    return np.array([
        [1.0, 0.0, ddisp_dv * c, -disp * s],
        [0.0, 1.0, ddisp_dv * s, disp * c],
        [0.0, 0.0, dv, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def jacobian_fd(mean: np.ndarray, u: ControlInput, lim: MotionLimits,
                terrain: TerrainModel, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of the deterministic transition."""
    jac = np.zeros((4, 4))
    for j in range(4):
        plus = np.array(mean, dtype=float)
        minus = np.array(mean, dtype=float)
        plus[j] += h
        minus[j] -= h
        fp = transition(plus, u, lim, terrain)
        fm = transition(minus, u, lim, terrain)
        diff = fp - fm
        diff[3] = wrap_angle(diff[3])  # heading column may cross +/- pi
        jac[:, j] = diff / (2.0 * h)
    return jac


def ekf_predict(fs: FilterState, u: ControlInput, lim: MotionLimits,
                terrain: TerrainModel, cfg: FilterConfig) -> FilterState:
    """Prediction step: mean through the deterministic model, P <- F P F^T + Q."""
    mean1 = transition(fs.mean, u, lim, terrain)
    if cfg.jacobian_mode == "analytic":
        F = jacobian_analytic(fs.mean, u, lim, terrain)
    else:
        F = jacobian_fd(fs.mean, u, lim, terrain)
    cov1 = F @ fs.cov @ F.T + cfg.q
    cov1 = 0.5 * (cov1 + cov1.T)
    return FilterState(mean1, cov1, fs.k + 1)


def ekf_update(fs: FilterState, z: PositionFix,
               cfg: FilterConfig) -> tuple[FilterState, EkfUpdateTrace]:
    """Measurement update with a position fix.

    Raises FilterError if the residual covariance is singular (R must be
    positive definite).
    """
    resid = np.array([z.position.x, z.position.y]) - fs.mean[:2]
    s_mat = fs.cov[:2, :2] + cfg.r
    try:
        gain = np.linalg.solve(s_mat, fs.cov[:, :2].T).T
    except np.linalg.LinAlgError as exc:
        raise FilterError("singular residual covariance; R must be PD") from exc
    mean1 = fs.mean + gain @ resid
    mean1[2] = max(mean1[2], 0.0)
    mean1[3] = wrap_angle(mean1[3])
    a_mat = np.eye(4)
    a_mat[:, :2] -= gain
    cov1 = a_mat @ fs.cov
    cov1 = 0.5 * (cov1 + cov1.T)
    return (FilterState(mean1, cov1, fs.k),
            EkfUpdateTrace(resid, s_mat, gain))


@dataclass
class ParticleSet:
    """Weighted particle cloud over (x, y, v, theta)."""

    states: np.ndarray   # (N, 4)
    weights: np.ndarray  # (N,), normalized
    degenerate_resets: int = 0

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)


def init_particles(mean: np.ndarray, cfg: FilterConfig,
                   rng: np.random.Generator) -> ParticleSet:
    """Gaussian particle cloud around an initial mean, spread per initial_covariance."""
    n = cfg.particle_count
    std = np.sqrt(np.diag(cfg.initial_covariance))
    states = np.asarray(mean, dtype=float) + rng.normal(0.0, 1.0, (n, 4)) * std
    states[:, 2] = np.maximum(states[:, 2], 0.0)
    states[:, 3] = wrap_angle_array(states[:, 3])
    return ParticleSet(states, np.full(n, 1.0 / n))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Systematic (low-variance) resampling; returns selected indices."""
    n = len(weights)
    positions = (np.arange(n) + rng.uniform()) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0  # guard rounding
    return np.searchsorted(cumulative, positions)


def pf_step(particles: ParticleSet, u: ControlInput, z: PositionFix,
            lim: MotionLimits, noise: NoiseParams, terrain: TerrainModel,
            cfg: FilterConfig, rng: np.random.Generator) -> ParticleSet:
    """One bootstrap-filter step: propagate, reweight by the fix likelihood,
    resample when the effective sample size drops below the threshold."""
    states = step_array(particles.states, u, lim, noise, terrain, rng)
    resets = particles.degenerate_resets

    diff = states[:, :2] - np.array([z.position.x, z.position.y])
    try:
        rinv = np.linalg.inv(cfg.r)
    except np.linalg.LinAlgError as exc:
        raise FilterError("singular measurement covariance") from exc
    maha = np.einsum("ni,ij,nj->n", diff, rinv, diff)
    with np.errstate(divide="ignore"):
        logw = np.log(particles.weights) - 0.5 * maha
    peak = np.max(logw)
    if not np.isfinite(peak):
        # total underflow: restart from uniform weights and flag it
        weights = np.full(len(states), 1.0 / len(states))
        resets += 1
    else:
        weights = np.exp(logw - peak)
        weights /= weights.sum()

    ess = 1.0 / float(np.sum(weights ** 2))
    if ess < cfg.resample_threshold * len(weights):
        idx = systematic_resample(weights, rng)
        states = states[idx]
        weights = np.full(len(states), 1.0 / len(states))
    return ParticleSet(states, weights, resets)


def pf_estimate(particles: ParticleSet) -> np.ndarray:
    """Weighted posterior mean; heading averaged on the circle."""
    w = particles.weights
    s = particles.states
    est = np.empty(4)
    est[:3] = w @ s[:, :3]
    est[3] = math.atan2(float(w @ np.sin(s[:, 3])), float(w @ np.cos(s[:, 3])))
    return est
