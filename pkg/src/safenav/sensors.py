"""Simulated landmark-based position fixes and IMU readings.

Stands in for the vision/stereo localization pipeline: position fixes come
from least-squares trilateration against landmark clusters, with noise knobs
calibrated to the reported per-axis fix accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point2
from .motion import MotionState, wrap_angle

# Reported per-axis RMSE of the landmark localizer (meters), used as the
# default fix-noise calibration.
DEFAULT_FIX_SIGMA_X = 0.0142
DEFAULT_FIX_SIGMA_Y = 0.039


class TrilaterationError(ValueError):
    """Anchors are ill-conditioned or the solver failed to converge."""


class LocalizationUnavailableError(RuntimeError):
    """No landmark cluster with enough members is within detection range."""


@dataclass(frozen=True)
class Landmark:
    id: int
    position: Point2
    cluster_id: int


@dataclass(frozen=True)
class LandmarkCluster:
    """A trilateration set: at least three landmarks plus their centroid."""

    id: int
    member_ids: tuple[int, ...]
    centroid: Point2

    def __post_init__(self) -> None:
        if len(self.member_ids) < 3:
            raise ValueError(f"cluster {self.id} needs >= 3 members")


@dataclass(frozen=True)
class PositionFix:
    """A 2D position measurement with its reported covariance (m^2)."""

    position: Point2
    covariance: np.ndarray

    def __post_init__(self) -> None:
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric 2x2")
        if np.any(np.linalg.eigvalsh(cov) < -1e-12):
            raise ValueError("covariance must be PSD")
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True)
class SensorNoise:
    """Noise model of the localization and IMU simulators."""

    sigma_range: float = 0.0
    sigma_fix_x: float = DEFAULT_FIX_SIGMA_X
    sigma_fix_y: float = DEFAULT_FIX_SIGMA_Y
    sigma_imu_v: float = 0.0
    sigma_imu_theta: float = 0.0
    detect_range: float = 60.0

    def __post_init__(self) -> None:
        for name in ("sigma_range", "sigma_fix_x", "sigma_fix_y",
                     "sigma_imu_v", "sigma_imu_theta", "detect_range"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


class LandmarkMap:
    """Landmarks grouped into clusters, with per-cluster coordinate arrays."""

    def __init__(self, landmarks: list[Landmark]):
        ids = [lm.id for lm in landmarks]
        if len(set(ids)) != len(ids):
            raise ValueError("landmark ids must be unique")
        self.landmarks = {lm.id: lm for lm in landmarks}
        by_cluster: dict[int, list[Landmark]] = {}
        for lm in landmarks:
            by_cluster.setdefault(lm.cluster_id, []).append(lm)
        self.clusters: list[LandmarkCluster] = []
        self._cluster_coords: dict[int, np.ndarray] = {}
        for cid in sorted(by_cluster):
            members = by_cluster[cid]
            coords = np.array([(lm.position.x, lm.position.y) for lm in members])
            cen = coords.mean(axis=0)
            self.clusters.append(LandmarkCluster(
                id=cid,
                member_ids=tuple(lm.id for lm in members),
                centroid=Point2(float(cen[0]), float(cen[1])),
            ))
            self._cluster_coords[cid] = coords

    def cluster_by_id(self, cid: int) -> LandmarkCluster:
        for c in self.clusters:
            if c.id == cid:
                return c
        raise KeyError(f"unknown cluster id {cid}")

    def cluster_coords(self, cid: int) -> np.ndarray:
        return self._cluster_coords[cid]


def trilaterate(anchors, distances) -> Point2:
    """Least-squares position from >= 3 anchor points and range measurements.

    Linearizes by subtracting the first anchor's circle equation, then refines
    with Gauss-Newton iterations on the range residuals. Exact on consistent
    ranges; raises TrilaterationError on collinear anchors or non-convergence.
    """
    if isinstance(anchors, np.ndarray):
        pts = np.asarray(anchors, dtype=float)
    else:
        pts = np.array([(a.position.x, a.position.y) if isinstance(a, Landmark)
                        else (a.x, a.y) if isinstance(a, Point2) else tuple(a)
                        for a in anchors], dtype=float)
    d = np.asarray(distances, dtype=float)
    if len(pts) < 3 or len(pts) != len(d):
        raise TrilaterationError("need >= 3 anchors with matching distances")
    if np.any(d < 0.0):
        raise TrilaterationError("distances must be >= 0")

    a0 = pts[0]
    rows = 2.0 * (pts[1:] - a0)
    norms = np.einsum("ij,ij->i", pts, pts)
    b = d[0] ** 2 - d[1:] ** 2 + norms[1:] - norms[0]
    # rank < 2 means the anchors are collinear
    if np.linalg.matrix_rank(rows, tol=1e-9) < 2:
        raise TrilaterationError("collinear anchors")
    p, *_ = np.linalg.lstsq(rows, b, rcond=None)

    for _ in range(25):
        delta = p - pts
        ranges = np.sqrt(np.einsum("ij,ij->i", delta, delta))
        ranges = np.maximum(ranges, 1e-12)
        residual = ranges - d
        jac = delta / ranges[:, None]
        try:
            update, *_ = np.linalg.lstsq(jac, residual, rcond=None)
        except np.linalg.LinAlgError as exc:
            raise TrilaterationError("normal equations singular") from exc
        p = p - update
        if float(np.hypot(update[0], update[1])) < 1e-10:
            break
    else:
        raise TrilaterationError("Gauss-Newton did not converge")
    return Point2(float(p[0]), float(p[1]))


def measure_position(true_pos: Point2, world, noise: SensorNoise,
                     rng: np.random.Generator) -> PositionFix:
    """Simulate one landmark-based position fix at the true position.

    Picks the nearest cluster with >= 3 members in detection range, perturbs
    the true ranges with sigma_range, trilaterates, and adds per-axis fix
    noise. Raises LocalizationUnavailableError when no cluster qualifies.
    """
    lmap: LandmarkMap = getattr(world, "landmark_map", world)
    best_cid = None
    best_coords = None
    best_dist = math.inf
    for cluster in lmap.clusters:
        coords = lmap.cluster_coords(cluster.id)
        dists = np.hypot(coords[:, 0] - true_pos.x, coords[:, 1] - true_pos.y)
        in_range = dists <= noise.detect_range
        if int(in_range.sum()) < 3:
            continue
        cdist = true_pos.distance_to(cluster.centroid)
        if cdist < best_dist:
            best_dist = cdist
            best_cid = cluster.id
            best_coords = coords[in_range]
    if best_cid is None:
        raise LocalizationUnavailableError(
            f"no cluster with >= 3 landmarks within {noise.detect_range} m")

    ranges = np.hypot(best_coords[:, 0] - true_pos.x, best_coords[:, 1] - true_pos.y)
    ranges = ranges + rng.normal(0.0, noise.sigma_range, len(ranges))
    np.maximum(ranges, 0.0, out=ranges)
    p = trilaterate(best_coords, ranges)
    fix = Point2(p.x + rng.normal(0.0, noise.sigma_fix_x),
                 p.y + rng.normal(0.0, noise.sigma_fix_y))
    cov = np.diag([noise.sigma_fix_x ** 2, noise.sigma_fix_y ** 2])
    return PositionFix(fix, cov)


def measure_imu(true_state: MotionState, noise: SensorNoise,
                rng: np.random.Generator) -> tuple[float, float]:
    """Noisy (speed, heading) reading; speed clamped >= 0, heading wrapped."""
    v = true_state.v + rng.normal(0.0, noise.sigma_imu_v)
    theta = wrap_angle(true_state.theta + rng.normal(0.0, noise.sigma_imu_theta))
    return max(v, 0.0), theta
