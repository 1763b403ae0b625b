"""safenav: GPS-denied safe-path navigation simulation.

Landmark-trilateration position fixes, a rate-limited battlefield motion
model, EKF/particle-filter state estimation, corridor safety checks (convex
hull and centroid methods), risk-aware RRT* replanning, and a Monte-Carlo
metric harness (ADE, FDE, AWRS, percent error).
"""

from .geometry import (ConvexPolygon, DegenerateHullError, Point2, Polyline,
                       centroid, closest_point_on_polyline, convex_hull,
                       point_in_polygon, polyline_length, split_polyline)
from .motion import (ControlInput, MotionLimits, MotionState, NoiseParams,
                     TerrainModel, step, update_heading, update_position,
                     update_velocity)
from .risk import (RiskZoneConfig, SafePathBuffer, TrajectoryMetrics, ade,
                   awrs, fde, percent_error, wrs)
from .scenario import (Scenario, World, build_ground_truth_path,
                       build_safe_path, gen_synthetic, gen_world,
                       load_scenario, make_default_scenario, save_scenario)

__version__ = "0.1.0"
