"""Safe-path buffer, zone-weighted risk scoring, and the trajectory metric suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Polyline, as_coords, distances_to_polyline, polyline_length

DEFAULT_ZONE_WEIGHTS = (2.0, 4.0, 6.0, 8.0)


@dataclass(frozen=True)
class RiskZoneConfig:
    """Deviation zones on either side of the central trajectory.

    zone_bounds are contiguous half-open intervals [a_j, b_j) ascending from 0
    to d_max; deviations at or beyond d_max score the capped maximum. The
    default score for deviation d in zone j is |d| * (|d| / w_j); the
    multiplicative reading |d| * w_j is available as a non-default switch.
    """

    zone_bounds: tuple[tuple[float, float], ...]
    zone_weights: tuple[float, ...] = DEFAULT_ZONE_WEIGHTS
    d_max: float = 10.0
    w_max: float = 8.0
    multiplicative: bool = False

    def __post_init__(self) -> None:
        if len(self.zone_bounds) != len(self.zone_weights):
            raise ValueError("one weight per zone required")
        lo = 0.0
        for (a, b) in self.zone_bounds:
            if abs(a - lo) > 1e-9 or b <= a:
                raise ValueError("zone bounds must be contiguous ascending from 0")
            lo = b
        if abs(lo - self.d_max) > 1e-9:
            raise ValueError("zone bounds must span [0, d_max]")
        ws = self.zone_weights
        if any(w <= 0 for w in ws) or any(ws[i] >= ws[i + 1] for i in range(len(ws) - 1)):
            raise ValueError("zone weights must be positive ascending")

    @classmethod
    def equal_zones(cls, width: float, weights=DEFAULT_ZONE_WEIGHTS,
                    multiplicative: bool = False) -> "RiskZoneConfig":
        """Equal-width zones spanning [0, width], one per weight."""
        n = len(weights)
        edges = [width * j / n for j in range(n)] + [float(width)]
        bounds = tuple((edges[j], edges[j + 1]) for j in range(n))
        return cls(zone_bounds=bounds, zone_weights=tuple(float(w) for w in weights),
                   d_max=float(width), w_max=float(weights[-1]),
                   multiplicative=multiplicative)

    @property
    def uppers(self) -> np.ndarray:
        return np.array([b for (_, b) in self.zone_bounds])


def wrs(d: float, zones: RiskZoneConfig) -> float:
    """Zone-based weighted risk score of a single deviation."""
    ad = abs(d)
    if ad >= zones.d_max:
        if zones.multiplicative:
            return zones.d_max * zones.w_max
        return zones.d_max * (zones.d_max / zones.w_max)
    j = int(np.searchsorted(zones.uppers, ad, side="right"))
    w = zones.zone_weights[j]
    return ad * w if zones.multiplicative else ad * (ad / w)


def wrs_array(d: np.ndarray, zones: RiskZoneConfig) -> np.ndarray:
    """Vectorized wrs over an array of deviations."""
    ad = np.abs(np.asarray(d, dtype=float))
    j = np.searchsorted(zones.uppers, ad, side="right")
    capped = ad >= zones.d_max
    j = np.minimum(j, len(zones.zone_weights) - 1)
    w = np.asarray(zones.zone_weights)[j]
    if zones.multiplicative:
        out = ad * w
        cap = zones.d_max * zones.w_max
    else:
        out = ad * (ad / w)
        cap = zones.d_max * (zones.d_max / zones.w_max)
    out[capped] = cap
    return out


@dataclass(frozen=True)
class SafePathBuffer:
    """Corridor around a ground-truth polyline: ordered segments plus risk zones."""

    central: Polyline
    half_width: float
    segments: tuple[Polyline, ...]
    zones: RiskZoneConfig

    def __post_init__(self) -> None:
        if self.half_width <= 0.0:
            raise ValueError("half_width must be > 0")
        if abs(self.zones.d_max - self.half_width) > 1e-9:
            raise ValueError("zone span must equal the buffer half width")

    def contains(self, p) -> bool:
        return float(distances_to_polyline(as_coords(p), self.central)[0]) <= self.half_width


def deviations(traj, central: Polyline) -> np.ndarray:
    """Distance from each trajectory point to the central polyline."""
    return distances_to_polyline(as_coords(traj), central)


def awrs(traj, buffer: SafePathBuffer) -> float:
    """Average weighted risk score over the trajectory points."""
    pts = as_coords(traj)
    if len(pts) == 0:
        raise ValueError("empty trajectory")
    return float(wrs_array(deviations(pts, buffer.central), buffer.zones).mean())


def ade(est, truth) -> float:
    """Average displacement error: mean of per-index point distances."""
    a = as_coords(est)
    b = as_coords(truth)
    if len(a) != len(b):
        raise ValueError(f"point counts differ: {len(a)} vs {len(b)}")
    return float(np.sqrt(((a - b) ** 2).sum(axis=1)).mean())


def fde(est, truth) -> float:
    """Final displacement error: distance between the final points."""
    a = as_coords(est)
    b = as_coords(truth)
    return float(np.hypot(a[-1, 0] - b[-1, 0], a[-1, 1] - b[-1, 1]))


def percent_error(est_len: float, true_len: float) -> float:
    """Relative path-length error, in percent."""
    if true_len <= 0.0:
        raise ValueError("true length must be > 0")
    return abs(est_len - true_len) / true_len * 100.0


@dataclass
class TrajectoryMetrics:
    """Metric bundle for one trial or an aggregate."""

    ade: float
    fde: float
    awrs: float
    percent_error: float
    mean_step_runtime_ms: float
    trajectory_length: float

    def __post_init__(self) -> None:
        for name in ("ade", "fde", "awrs", "percent_error",
                     "mean_step_runtime_ms", "trajectory_length"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return {
            "ade": self.ade,
            "fde": self.fde,
            "awrs": self.awrs,
            "percent_error": self.percent_error,
            "mean_step_runtime_ms": self.mean_step_runtime_ms,
            "trajectory_length": self.trajectory_length,
        }


__all__ = [
    "RiskZoneConfig", "SafePathBuffer", "TrajectoryMetrics",
    "wrs", "wrs_array", "awrs", "ade", "fde", "percent_error",
    "deviations", "polyline_length", "DEFAULT_ZONE_WEIGHTS",
]
