"""Global A* planning on an inflated costmap plus a dynamic-window local planner.

Cost convention (ROS-style): 0 free, (0, 253] inflated, 254 lethal,
255 unknown. Edge weights are step length x (1 + cell_cost/128) where the
cell is the one being entered; straight and diagonal contributions are
accumulated as separate dyadic-rational sums so path costs are exact and
comparable across implementations.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import GridMap, Point2D, Pose2D, Twist
from .sim import RobotProfile

COST_FREE = 0
COST_INFLATED_MAX = 253
COST_LETHAL = 254
COST_UNKNOWN = 255
SQRT2 = math.sqrt(2.0)


class PlanningError(ValueError):
    pass


@dataclass
class Costmap:
    """Integer traversal costs sharing the base grid's geometry."""

    base: GridMap
    inflation_radius: float
    cost: np.ndarray

    def __post_init__(self):
        if self.cost.shape != (self.base.height, self.base.width):
            raise ValueError("cost shape does not match base grid")

    def cost_at(self, p: Point2D) -> int:
        cell = self.base.world_to_grid(p)
        if cell is None:
            return COST_UNKNOWN
        col, row = cell
        return int(self.cost[row, col])


@dataclass(frozen=True)
class Path:
    """Global plan: cell-center waypoints, 8-connected in grid space."""

    waypoints: tuple
    total_cost: float


@dataclass(frozen=True)
class DwaParams:
    v_samples: int = 7
    w_samples: int = 15
    horizon: float = 1.5
    dt: float = 0.05
    alpha_heading: float = 0.8
    beta_clearance: float = 0.2
    gamma_velocity: float = 0.1
    accel_v: float = 1.0
    accel_w: float = 2.5
    lookahead: float = 0.8

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class DwaResult:
    twist: Twist
    blocked: bool
    arc: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))


def coarsen(grid: GridMap, factor: int) -> GridMap:
    """Downsample by max-pooling log-odds (occupied beats unknown beats free)."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return grid.copy()
    h = (grid.height // factor) * factor
    w = (grid.width // factor) * factor
    pooled = grid.cells[:h, :w].reshape(h // factor, factor,
                                        w // factor, factor).max(axis=(1, 3))
    return GridMap(grid.resolution * factor, w // factor, h // factor,
                   grid.origin, pooled)


def inflate(grid: GridMap, radius: float, occupied_threshold: float = 0.65,
            free_threshold: float = 0.25, *,
            unknown_as_free: bool = False) -> Costmap:
    """Threshold a log-odds grid into costs and grow an exponential ring.

    Cost decays from 253 next to an obstacle down to 1 at `radius`; unknown
    cells are marked impassable unless `unknown_as_free` (used for optimistic
    planning over unexplored ground).
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    probs = grid.occupancy_probabilities()
    lethal = probs > occupied_threshold
    unknown = ~lethal & (probs >= free_threshold)

    cost = np.zeros(probs.shape, dtype=np.int16)
    if radius > 0 and lethal.any():
        d = ndimage.distance_transform_edt(~lethal) * grid.resolution
        # tiny slack so cells at exactly `radius` survive float rounding
        ring = ~lethal & (d <= radius + 1e-9)
        decay = math.log(COST_INFLATED_MAX) / radius
        cost[ring] = np.maximum(
            1, np.floor(COST_INFLATED_MAX * np.exp(-decay * d[ring])))
    cost[lethal] = COST_LETHAL
    if not unknown_as_free:
        cost[unknown] = COST_UNKNOWN
    return Costmap(grid, radius, cost)


_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, -1),
              (0, 1), (1, -1), (1, 0), (1, 1))


def plan_global(cm: Costmap, start: Point2D, goal: Point2D) -> Path:
    """A* over the 8-connected costmap; exact minimal cost per the edge metric."""
    start_cell = cm.base.world_to_grid(start)
    goal_cell = cm.base.world_to_grid(goal)
    if start_cell is None or goal_cell is None:
        raise ValueError("start or goal out of bounds")
    cells = cm.cost
    grid = cm.base
    sc, sr = start_cell
    gc, gr = goal_cell
    if cells[sr, sc] >= COST_LETHAL or cells[gr, gc] >= COST_LETHAL:
        raise PlanningError("unreachable endpoint")
    if (sc, sr) == (gc, gr):
        c = grid.grid_to_world(sc, sr)
        return Path((Pose2D(c.x, c.y, 0.0),), 0.0)

    def octile(c, r):
        dx, dy = abs(c - gc), abs(r - gr)
        return (max(dx, dy) - min(dx, dy)) + min(dx, dy) * SQRT2

    dist = np.full(cells.shape, np.inf)
    dist[sr, sc] = 0.0
    acc = {(sc, sr): (0.0, 0.0)}       # exact (straight, diagonal) sums
    parent: dict[tuple, tuple] = {}
    counter = 0
    pq = [(octile(sc, sr), 0.0, counter, sc, sr)]
    h, w = cells.shape
    while pq:
        _, d, _, c, r = heapq.heappop(pq)
        if d > dist[r, c]:
            continue
        if (c, r) == (gc, gr):
            gs, gd = acc[(c, r)]
            return _reconstruct(grid, parent, (sc, sr), (gc, gr),
                                gs + gd * SQRT2)
        gs, gd = acc[(c, r)]
        for dc, dr in _NEIGHBORS:
            nc, nr = c + dc, r + dr
            if not (0 <= nc < w and 0 <= nr < h) or cells[nr, nc] >= COST_LETHAL:
                continue
            mult = 1.0 + float(cells[nr, nc]) / 128.0
            if dc and dr:
                gs2, gd2 = gs, gd + mult
            else:
                gs2, gd2 = gs + mult, gd
            nd = gs2 + gd2 * SQRT2
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                acc[(nc, nr)] = (gs2, gd2)
                parent[(nc, nr)] = (c, r)
                counter += 1
                heapq.heappush(pq, (nd + octile(nc, nr), nd, counter, nc, nr))
    raise PlanningError("no path")


def _reconstruct(grid: GridMap, parent, start, goal, total_cost) -> Path:
    cells = [goal]
    while cells[-1] != start:
        cells.append(parent[cells[-1]])
    cells.reverse()
    waypoints = []
    for i, (c, r) in enumerate(cells):
        p = grid.grid_to_world(c, r)
        if i + 1 < len(cells):
            nxt = grid.grid_to_world(*cells[i + 1])
            theta = math.atan2(nxt.y - p.y, nxt.x - p.x)
        else:
            theta = waypoints[-1].theta if waypoints else 0.0
        waypoints.append(Pose2D(p.x, p.y, theta))
    return Path(tuple(waypoints), total_cost)


def dynamic_window(current: Twist, params: DwaParams,
                   profile: RobotProfile) -> tuple[float, float, float, float]:
    """(v_lo, v_hi, w_lo, w_hi) reachable within one params.dt (no reversing)."""
    v_lo = max(0.0, current.v - params.accel_v * params.dt)
    v_hi = min(profile.v_max, current.v + params.accel_v * params.dt)
    w_lo = max(-profile.omega_max, current.omega - params.accel_w * params.dt)
    w_hi = min(profile.omega_max, current.omega + params.accel_w * params.dt)
    return v_lo, v_hi, w_lo, w_hi


def _arc_points(pose: Pose2D, v: np.ndarray, w: np.ndarray,
                ts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form unicycle rollout: (n, k) x/y arrays and (n,) end headings."""
    straight = np.abs(w) < 1e-9
    safe_w = np.where(straight, 1.0, w)
    wt = w[:, None] * ts[None, :]
    radius = (v / safe_w)[:, None]
    sin0, cos0 = math.sin(pose.theta), math.cos(pose.theta)
    xs = np.where(straight[:, None],
                  pose.x + v[:, None] * ts[None, :] * cos0,
                  pose.x + radius * (np.sin(pose.theta + wt) - sin0))
    ys = np.where(straight[:, None],
                  pose.y + v[:, None] * ts[None, :] * sin0,
                  pose.y - radius * (np.cos(pose.theta + wt) - cos0))
    end_theta = pose.theta + w * ts[-1]
    return xs, ys, end_theta


def _pick_target(path: Path, pose: Pose2D, lookahead: float) -> Point2D:
    wp = np.array([(p.x, p.y) for p in path.waypoints])
    d = np.hypot(wp[:, 0] - pose.x, wp[:, 1] - pose.y)
    i0 = int(np.argmin(d))
    ahead = np.flatnonzero(d[i0:] >= lookahead)
    idx = i0 + int(ahead[0]) if len(ahead) else len(wp) - 1
    return Point2D(wp[idx, 0], wp[idx, 1])


def dwa_step(cm: Costmap, pose: Pose2D, current: Twist, path: Path,
             params: DwaParams = DwaParams(),
             profile: RobotProfile = RobotProfile()) -> DwaResult:
    """One dynamic-window step toward the path's lookahead target."""
    if not path.waypoints:
        raise ValueError("path is empty")
    v_lo, v_hi, w_lo, w_hi = dynamic_window(current, params, profile)
    vs = np.linspace(v_lo, v_hi, params.v_samples)
    ws = np.linspace(w_lo, w_hi, params.w_samples)
    if w_lo <= 0.0 <= w_hi:
        ws[np.argmin(np.abs(ws))] = 0.0    # straight arc sampled exactly
    v = np.repeat(vs, params.w_samples)
    w = np.tile(ws, params.v_samples)

    steps = max(1, int(round(params.horizon / params.dt)))
    ts = params.dt * np.arange(1, steps + 1)
    xs, ys, end_theta = _arc_points(pose, v, w, ts)

    res = cm.base.resolution
    cols = np.floor((xs - cm.base.origin.x) / res).astype(np.int64)
    rows = np.floor((ys - cm.base.origin.y) / res).astype(np.int64)
    inb = (cols >= 0) & (cols < cm.base.width) & \
          (rows >= 0) & (rows < cm.base.height)
    costs = np.full(cols.shape, COST_UNKNOWN, dtype=np.int16)
    costs[inb] = cm.cost[rows[inb], cols[inb]]
    collides = (costs >= COST_LETHAL).any(axis=1)
    if collides.all():
        return DwaResult(Twist(0.0, 0.0), blocked=True)

    # target sits beyond any arc's reach so a perfect arc never overshoots it
    reach = v_hi * params.horizon + 2.0 * cm.base.resolution
    target = _pick_target(path, pose, max(params.lookahead, reach))
    bearing = np.arctan2(target.y - ys[:, -1], target.x - xs[:, -1])
    err = np.abs(np.arctan2(np.sin(bearing - end_theta),
                            np.cos(bearing - end_theta)))
    heading_score = 1.0 - err / math.pi
    clearance = 1.0 - costs.max(axis=1) / COST_INFLATED_MAX
    velocity = np.abs(v) / profile.v_max
    score = (params.alpha_heading * heading_score
             + params.beta_clearance * clearance
             + params.gamma_velocity * velocity)

    ok = np.flatnonzero(~collides)
    best = max(ok, key=lambda i: (score[i], -abs(w[i]), -i))
    arc = np.column_stack((xs[best], ys[best]))
    return DwaResult(Twist(float(v[best]), float(w[best])), False, arc)
