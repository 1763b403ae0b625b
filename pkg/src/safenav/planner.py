"""RRT* with a risk-aware cost: node cost adds zone-weighted deviation risk
to path length, so rewiring trades length against corridor-center hugging."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point2, as_coords, distances_to_polyline, project_onto_polyline
from .risk import SafePathBuffer, wrs, wrs_array


class PlanningFailedError(RuntimeError):
    """No tree node reached the goal region within the iteration budget."""

    def __init__(self, message: str, best_distance: float, best_cost: float):
        super().__init__(message)
        self.best_distance = best_distance
        self.best_cost = best_cost


@dataclass(frozen=True)
class ObstacleMap:
    """Circular obstacles (block motion) and hazards (render only; risk is
    carried by the deviation zones)."""

    obstacles: np.ndarray  # (K, 3) columns x, y, r
    hazards: np.ndarray    # (K, 3)

    def __post_init__(self) -> None:
        for name in ("obstacles", "hazards"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1, 3)
            if np.any(arr[:, 2] <= 0.0):
                raise ValueError(f"{name} radii must be > 0")
            object.__setattr__(self, name, arr)

    @classmethod
    def from_lists(cls, obstacles, hazards) -> "ObstacleMap":
        def pack(items):
            if len(items) == 0:
                return np.zeros((0, 3))
            return np.array([(x, y, r) for (x, y, r) in items], dtype=float)
        return cls(pack(obstacles), pack(hazards))

    def inflated(self, margin: float) -> "ObstacleMap":
        obs = self.obstacles.copy()
        obs[:, 2] += margin
        return ObstacleMap(obs, self.hazards)


@dataclass(frozen=True)
class PlannerConfig:
    alpha: float = 1.0
    beta: float = 1.0
    max_iterations: int = 2000
    step_size: float = 5.0
    goal_radius: float = 2.0
    rewire_radius: float = 10.0
    goal_bias: float = 0.05
    edge_risk_samples: int = 0  # >0 subsamples edge interiors for the risk cost
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("alpha and beta must be >= 0")
        if self.step_size <= 0.0:
            raise ValueError("step_size must be > 0")


@dataclass
class PlanResult:
    """A collision-free path with its cost decomposition and the search tree."""

    path: np.ndarray          # (M, 2)
    total_cost: float
    length_cost: float
    risk_cost: float
    iterations_used: int
    best_cost_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tree_nodes: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    tree_parents: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    tree_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tree_risks: np.ndarray = field(default_factory=lambda: np.zeros(0))


def segment_circle_distances(p1, p2, centers: np.ndarray) -> np.ndarray:
    """Distance from each center to the closed segment p1-p2."""
    a = np.asarray(p1, dtype=float)
    b = np.asarray(p2, dtype=float)
    d = b - a
    len2 = float(d @ d)
    rel = centers - a
    if len2 == 0.0:
        return np.sqrt(np.einsum("ij,ij->i", rel, rel))
    t = np.clip((rel @ d) / len2, 0.0, 1.0)
    diff = rel - t[:, None] * d
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _xy(p) -> np.ndarray:
    if isinstance(p, Point2):
        return np.array([p.x, p.y])
    return np.asarray(p, dtype=float).reshape(2)


def collision_free(p1, p2, omap: ObstacleMap) -> bool:
    """True iff the segment keeps clear of every obstacle disc (exact test)."""
    if len(omap.obstacles) == 0:
        return True
    dists = segment_circle_distances(_xy(p1), _xy(p2), omap.obstacles[:, :2])
    return bool(np.all(dists > omap.obstacles[:, 2]))


def _deviation(p: np.ndarray, buffer: SafePathBuffer) -> float:
    return project_onto_polyline(p, buffer.central)[1]


def _edge_risk(a: np.ndarray, b: np.ndarray, buffer: SafePathBuffer,
               cfg: PlannerConfig) -> float:
    """Risk contribution of the node at b; optionally averaged over edge samples."""
    if cfg.edge_risk_samples <= 0:
        return wrs(_deviation(b, buffer), buffer.zones)
    ts = np.linspace(0.0, 1.0, cfg.edge_risk_samples + 1)[1:]
    pts = a + ts[:, None] * (b - a)
    return float(np.mean([wrs(_deviation(p, buffer), buffer.zones) for p in pts]))


def path_cost(path, central_or_buffer, zones=None,
              cfg: PlannerConfig | None = None) -> tuple[float, float, float]:
    """(total, length, risk) of a path.

    Length is the sum of edge lengths; risk is the sum of per-point weighted
    risk scores of deviations from the central trajectory; total combines them
    with the alpha/beta weights.
    """
    if isinstance(central_or_buffer, SafePathBuffer):
        central = central_or_buffer.central
        zones = central_or_buffer.zones
    else:
        central = central_or_buffer
        if zones is None:
            raise ValueError("zones required when passing a bare central polyline")
    cfg = cfg or PlannerConfig()
    pts = as_coords(path)
    if len(pts) < 2:
        return 0.0, 0.0, 0.0
    length = float(np.sqrt(((pts[1:] - pts[:-1]) ** 2).sum(axis=1)).sum())
    risk = float(wrs_array(distances_to_polyline(pts, central), zones).sum())
    total = cfg.alpha * length + cfg.beta * risk
    return total, length, risk


def plan(start, goal, omap: ObstacleMap, buffer: SafePathBuffer,
         cfg: PlannerConfig, rng: np.random.Generator) -> PlanResult:
    """Grow a risk-aware RRT* from start and return the cheapest goal-reaching path.

    Sampling is uniform over the corridor dilated to twice the buffer half
    width (5% goal bias). Node cost is parent cost + alpha * edge length +
    beta * WRS(node); choose-parent and rewiring both minimize it, and rewired
    subtrees have their stored costs propagated. Raises PlanningFailedError
    when no node ends within goal_radius of the goal.
    """
    start = _xy(start)
    goal = _xy(goal)
    if float(np.hypot(*(goal - start))) < 1e-12:
        return PlanResult(path=start.reshape(1, 2), total_cost=0.0,
                          length_cost=0.0, risk_cost=0.0, iterations_used=0)

    n_max = cfg.max_iterations
    coords = np.zeros((n_max + 1, 2))
    costs = np.zeros(n_max + 1)
    node_risk = np.zeros(n_max + 1)
    parents = np.full(n_max + 1, -1, dtype=int)
    children: list[list[int]] = [[] for _ in range(n_max + 1)]
    coords[0] = start
    node_risk[0] = wrs(_deviation(start, buffer), buffer.zones)
    n_nodes = 1
    goal_nodes: list[int] = []
    trace = np.full(n_max, np.inf)

    cen = buffer.central.coords
    reach = 2.0 * buffer.half_width
    lo = np.minimum(cen.min(axis=0), np.minimum(start, goal)) - reach
    hi = np.maximum(cen.max(axis=0), np.maximum(start, goal)) + reach

    def sample() -> np.ndarray:
        if rng.uniform() < cfg.goal_bias:
            return goal.copy()
        for _ in range(64):
            p = rng.uniform(lo, hi)
            if _deviation(p, buffer) <= reach:
                return p
        return goal.copy()

    for k in range(n_max):
        p_rand = sample()
        d2 = np.einsum("ij,ij->i", coords[:n_nodes] - p_rand, coords[:n_nodes] - p_rand)
        i_near = int(np.argmin(d2))
        dist = math.sqrt(float(d2[i_near]))
        if dist < 1e-12:
            trace[k] = trace[k - 1] if k else np.inf
            continue
        if dist <= cfg.step_size:
            p_new = p_rand
        else:
            p_new = coords[i_near] + (cfg.step_size / dist) * (p_rand - coords[i_near])

        if collision_free(coords[i_near], p_new, omap):
            risk_new = _edge_risk(coords[i_near], p_new, buffer, cfg)
            near_d2 = np.einsum("ij,ij->i", coords[:n_nodes] - p_new,
                                coords[:n_nodes] - p_new)
            near_idx = np.flatnonzero(near_d2 <= cfg.rewire_radius ** 2)
            if i_near not in near_idx:
                near_idx = np.append(near_idx, i_near)

            # choose-parent: cheapest collision-free connection
            cand_cost = costs[near_idx] + cfg.alpha * np.sqrt(near_d2[near_idx]) \
                + cfg.beta * risk_new
            best_parent = -1
            best_cost = math.inf
            for j in near_idx[np.argsort(cand_cost)]:
                if collision_free(coords[j], p_new, omap):
                    best_parent = int(j)
                    best_cost = costs[j] + cfg.alpha * math.sqrt(float(near_d2[j])) \
                        + cfg.beta * risk_new
                    break
            if best_parent >= 0:
                i_new = n_nodes
                coords[i_new] = p_new
                costs[i_new] = best_cost
                node_risk[i_new] = risk_new
                parents[i_new] = best_parent
                children[best_parent].append(i_new)
                n_nodes += 1

                # rewire neighbours through the new node
                for j in near_idx:
                    j = int(j)
                    if j == best_parent:
                        continue
                    alt = costs[i_new] + cfg.alpha * math.sqrt(float(near_d2[j])) \
                        + cfg.beta * node_risk[j]
                    if alt < costs[j] - 1e-12 and collision_free(p_new, coords[j], omap):
                        children[parents[j]].remove(j)
                        parents[j] = i_new
                        children[i_new].append(j)
                        delta = alt - costs[j]
                        stack = [j]
                        while stack:
                            i = stack.pop()
                            costs[i] += delta
                            stack.extend(children[i])

                if float(np.hypot(*(p_new - goal))) <= cfg.goal_radius:
                    goal_nodes.append(i_new)

        trace[k] = min(costs[g] for g in goal_nodes) if goal_nodes else np.inf

    if not goal_nodes:
        gd = np.sqrt(np.einsum("ij,ij->i", coords[:n_nodes] - goal,
                               coords[:n_nodes] - goal))
        i_best = int(np.argmin(gd))
        raise PlanningFailedError(
            f"no path to goal within {n_max} iterations "
            f"(closest approach {gd[i_best]:.2f} m)",
            best_distance=float(gd[i_best]), best_cost=float(costs[i_best]))

    i_goal = min(goal_nodes, key=lambda g: costs[g])
    chain = []
    i = i_goal
    while i >= 0:
        chain.append(i)
        i = parents[i]
    path = coords[chain[::-1]]
    total, length, riskc = path_cost(path, buffer, cfg=cfg)
    return PlanResult(path=path, total_cost=total, length_cost=length,
                      risk_cost=riskc, iterations_used=n_max,
                      best_cost_trace=trace,
                      tree_nodes=coords[:n_nodes].copy(),
                      tree_parents=parents[:n_nodes].copy(),
                      tree_costs=costs[:n_nodes].copy(),
                      tree_risks=node_risk[:n_nodes].copy())
