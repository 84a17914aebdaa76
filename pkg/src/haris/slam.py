"""Occupancy-grid mapping and particle-filter localization.

The filter leans on the range scanner: odometry only proposes, a
likelihood-field model against the current map corrects. Mapping uses the
filter estimate and a single shared grid (per-particle maps are out of
scope). All hot paths are vectorized over beams and particles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import GridMap, LaserScan, Pose2D, compose, normalize_angle
from .sim import _as_rng


@dataclass(frozen=True)
class MappingParams:
    """Log-odds update constants for occupancy mapping."""

    l_occ: float = 0.85
    l_free: float = -0.4
    clamp: float = 4.0
    occupied_threshold: float = 0.65   # probability
    free_threshold: float = 0.25

    def __post_init__(self):
        if not (self.l_occ > 0 > self.l_free):
            raise ValueError("need l_occ > 0 > l_free")
        if self.clamp <= abs(self.l_occ):
            raise ValueError("clamp must exceed |l_occ|")

    @property
    def occupied_logodds(self) -> float:
        p = self.occupied_threshold
        return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class MotionNoise:
    """Proposal noise of the filter's motion model (not the simulator's)."""

    trans_std_per_m: float = 0.04
    rot_std_per_rad: float = 0.10
    rot_std_per_m: float = 0.02
    trans_floor: float = 0.002
    rot_floor: float = 0.002


@dataclass
class ParticleSet:
    """Weighted pose hypotheses; poses is (N, 3), weights sums to 1."""

    poses: np.ndarray
    weights: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.poses = np.atleast_2d(np.asarray(self.poses, dtype=np.float64))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.poses.shape[0] != self.weights.shape[0]:
            raise ValueError("poses/weights length mismatch")
        if np.any(self.weights < 0):
            raise ValueError("negative particle weight")

    @classmethod
    def around(cls, pose: Pose2D, count: int, spread_xy: float = 0.02,
               spread_theta: float = 0.01, rng=0) -> "ParticleSet":
        rng = _as_rng(rng)
        poses = np.tile([pose.x, pose.y, pose.theta], (count, 1))
        poses[:, 0] += rng.normal(0, spread_xy, count)
        poses[:, 1] += rng.normal(0, spread_xy, count)
        poses[:, 2] += rng.normal(0, spread_theta, count)
        return cls(poses, np.full(count, 1.0 / count))

    @property
    def count(self) -> int:
        return len(self.weights)

    def effective_sample_size(self) -> float:
        return 1.0 / float(np.sum(self.weights ** 2))


@dataclass(frozen=True)
class LocalizationEstimate:
    pose: Pose2D
    position_rms: float


# ---------------------------------------------------------------------------
# Mapping

def _beam_cells(grid: GridMap, ox: float, oy: float, angles: np.ndarray,
                lengths: np.ndarray):
    """Exact grid-line traversal for a batch of rays.

    Returns (beam_idx, cols, rows, is_last) flat arrays where is_last marks
    the final traversed cell of each beam (the endpoint cell for hit beams).
    Cells are produced by sorting all grid-line crossing parameters per beam
    and sampling interval midpoints, which is equivalent to Amanatides-Woo
    stepping but runs as a handful of array ops for the whole scan.
    """
    res = grid.resolution
    mx0, my0 = grid.origin.x, grid.origin.y
    B = len(angles)
    dx, dy = np.cos(angles), np.sin(angles)

    ts = [np.zeros(B), lengths]
    beams = [np.arange(B), np.arange(B)]

    for d, o, m0 in ((dx, ox, mx0), (dy, oy, my0)):
        a = (o - m0) / res                      # start, in grid-line units
        b = a + lengths * d / res               # end
        lo = np.where(d > 0, np.floor(a) + 1, np.floor(b) + 1)
        hi = np.where(d > 0, np.ceil(b) - 1, np.ceil(a) - 1)
        usable = np.abs(d) > 1e-12
        counts = np.where(usable, np.maximum(0, hi - lo + 1), 0).astype(np.int64)
        total = int(counts.sum())
        if total == 0:
            continue
        beam_idx = np.repeat(np.arange(B), counts)
        offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
        within = np.arange(total) - np.repeat(offsets, counts)
        k = np.repeat(lo, counts) + within
        t = (k - a) * res / d[beam_idx]
        ts.append(t)
        beams.append(beam_idx)

    t_all = np.concatenate(ts)
    b_all = np.concatenate(beams)
    order = np.lexsort((t_all, b_all))
    t_s, b_s = t_all[order], b_all[order]

    same = b_s[:-1] == b_s[1:]
    width = t_s[1:] - t_s[:-1]
    keep = same & (width > 1e-12)
    mid = 0.5 * (t_s[:-1] + t_s[1:])[keep]
    pb = b_s[:-1][keep]
    # a pair is the last of its beam when its second element closes the group
    nxt_differs = np.empty(len(t_s) - 1, dtype=bool)
    nxt_differs[-1] = True
    nxt_differs[:-1] = b_s[2:] != b_s[1:-1]
    is_last = nxt_differs[keep]

    cols = np.floor((ox + mid * np.cos(angles[pb]) - mx0) / res).astype(np.int64)
    rows = np.floor((oy + mid * np.sin(angles[pb]) - my0) / res).astype(np.int64)
    inb = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
    return pb[inb], cols[inb], rows[inb], is_last[inb]


def integrate_scan(grid: GridMap, pose: Pose2D, scan: LaserScan,
                   params: MappingParams = MappingParams()) -> GridMap:
    """Fold one scan into the map: carve free space, mark hit endpoints."""
    if grid.world_to_grid(pose.position) is None:
        raise ValueError("integration pose outside map bounds")
    angles = scan.angles() + pose.theta
    hits = scan.hit_mask()
    lengths = np.where(hits, scan.ranges, scan.range_max)
    positive = lengths > 1e-12
    if not positive.any():
        return grid
    beam_ids, cols, rows, is_last = _beam_cells(
        grid, pose.x, pose.y, angles[positive], lengths[positive])

    endpoint = is_last & hits[positive][beam_ids]
    free = ~endpoint
    np.add.at(grid.cells, (rows[free], cols[free]), params.l_free)
    np.add.at(grid.cells, (rows[endpoint], cols[endpoint]), params.l_occ)
    grid.cells[rows, cols] = np.clip(grid.cells[rows, cols],
                                     -params.clamp, params.clamp)
    return grid


def occupied_mask(grid: GridMap, params: MappingParams) -> np.ndarray:
    return grid.cells > params.occupied_logodds


def distance_field(grid: GridMap, params: MappingParams = MappingParams()) -> np.ndarray | None:
    """Distance (m) from each cell to the nearest occupied cell, or None if none."""
    occ = occupied_mask(grid, params)
    if not occ.any():
        return None
    return ndimage.distance_transform_edt(~occ) * grid.resolution


# ---------------------------------------------------------------------------
# Particle filter

def motion_update(ps: ParticleSet, odom_delta: Pose2D,
                  noise: MotionNoise = MotionNoise(), rng=0) -> ParticleSet:
    """Advance each particle by the odometry delta plus sampled proposal noise."""
    rng = _as_rng(rng)
    n = ps.count
    dist = math.hypot(odom_delta.x, odom_delta.y)
    rot = abs(odom_delta.theta)
    if dist == 0.0 and rot == 0.0 and noise.trans_floor == 0.0 and noise.rot_floor == 0.0:
        return ParticleSet(ps.poses.copy(), ps.weights.copy())
    std_xy = noise.trans_std_per_m * dist + noise.trans_floor
    std_th = (noise.rot_std_per_rad * rot + noise.rot_std_per_m * dist
              + noise.rot_floor)
    pert = rng.standard_normal((n, 3))
    ddx = odom_delta.x + pert[:, 0] * std_xy
    ddy = odom_delta.y + pert[:, 1] * std_xy
    ddt = odom_delta.theta + pert[:, 2] * std_th

    th = ps.poses[:, 2]
    c, s = np.cos(th), np.sin(th)
    out = np.empty_like(ps.poses)
    out[:, 0] = ps.poses[:, 0] + c * ddx - s * ddy
    out[:, 1] = ps.poses[:, 1] + s * ddx + c * ddy
    out[:, 2] = np.arctan2(np.sin(th + ddt), np.cos(th + ddt))
    return ParticleSet(out, ps.weights.copy())


def measurement_update(ps: ParticleSet, scan: LaserScan, grid: GridMap,
                       params: MappingParams = MappingParams(),
                       sigma: float = 0.2, max_beams: int = 60,
                       dist_field: np.ndarray | None = None,
                       oob_distance: float = 1.0) -> ParticleSet:
    """Reweight particles by the likelihood-field score of scan endpoints.

    dist_field may be passed in to reuse a precomputed transform; otherwise
    it is derived from the grid. A map with no occupied cells (or an
    all-zero likelihood) degenerates to uniform weights with the flag set.
    """
    if dist_field is None:
        dist_field = distance_field(grid, params)
    n = ps.count
    if dist_field is None:
        return ParticleSet(ps.poses.copy(), np.full(n, 1.0 / n), degenerate=True)

    hits = np.flatnonzero(scan.hit_mask())
    if len(hits) == 0:
        return ParticleSet(ps.poses.copy(), ps.weights.copy())
    if len(hits) > max_beams:
        stride = int(math.ceil(len(hits) / max_beams))
        hits = hits[::stride]

    beam_angles = scan.angles()[hits]
    r = scan.ranges[hits]
    lx = r * np.cos(beam_angles)
    ly = r * np.sin(beam_angles)

    th = ps.poses[:, 2]
    c, s = np.cos(th)[:, None], np.sin(th)[:, None]
    ex = ps.poses[:, 0][:, None] + c * lx[None, :] - s * ly[None, :]
    ey = ps.poses[:, 1][:, None] + s * lx[None, :] + c * ly[None, :]

    cols = np.floor((ex - grid.origin.x) / grid.resolution).astype(np.int64)
    rows = np.floor((ey - grid.origin.y) / grid.resolution).astype(np.int64)
    inb = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
    d = np.full(cols.shape, oob_distance)
    d[inb] = dist_field[rows[inb], cols[inb]]
    np.minimum(d, oob_distance, out=d)

    log_lik = -0.5 * np.sum(d * d, axis=1) / (sigma * sigma)
    log_lik -= log_lik.max()
    w = ps.weights * np.exp(log_lik)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        return ParticleSet(ps.poses.copy(), np.full(n, 1.0 / n), degenerate=True)
    return ParticleSet(ps.poses.copy(), w / total)


def resample_systematic(ps: ParticleSet, rng=0) -> ParticleSet:
    """Low-variance resampling, run only when N_eff drops below N/2."""
    n = ps.count
    if ps.effective_sample_size() >= n / 2.0:
        return ps
    rng = _as_rng(rng)
    positions = (np.arange(n) + rng.uniform()) / n
    cum = np.cumsum(ps.weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, positions, side="right")
    idx = np.minimum(idx, n - 1)
    return ParticleSet(ps.poses[idx].copy(), np.full(n, 1.0 / n))


def estimate(ps: ParticleSet) -> LocalizationEstimate:
    """Weighted mean position with circular-mean heading."""
    w = ps.weights
    total = w.sum()
    if total <= 0:
        raise ValueError("particle weights sum to zero")
    w = w / total
    x = float(np.dot(w, ps.poses[:, 0]))
    y = float(np.dot(w, ps.poses[:, 1]))
    th = float(math.atan2(np.dot(w, np.sin(ps.poses[:, 2])),
                          np.dot(w, np.cos(ps.poses[:, 2]))))
    spread = (ps.poses[:, 0] - x) ** 2 + (ps.poses[:, 1] - y) ** 2
    rms = float(math.sqrt(np.dot(w, spread)))
    return LocalizationEstimate(Pose2D(x, y, normalize_angle(th)), rms)


# ---------------------------------------------------------------------------
# Pipeline

@dataclass
class SlamConfig:
    particle_count: int = 500
    map_resolution: float = 0.05
    mapping: MappingParams = field(default_factory=MappingParams)
    motion_noise: MotionNoise = field(default_factory=MotionNoise)
    likelihood_sigma: float = 0.2
    max_beams: int = 60
    update_min_trans: float = 0.25   # meters between corrections
    update_min_rot: float = 0.35     # radians between corrections


class SlamPipeline:
    """Sequential SLAM task: consumes odometry deltas and scans, owns the map."""

    def __init__(self, grid: GridMap, initial_pose: Pose2D,
                 config: SlamConfig = SlamConfig(), rng=0):
        self.config = config
        self.grid = grid
        self.rng = _as_rng(rng)
        self.particles = ParticleSet.around(initial_pose, config.particle_count,
                                            rng=self.rng)
        self._pending = Pose2D(0, 0, 0)
        self._pending_dist = 0.0
        self._pending_rot = 0.0
        self._dist_field: np.ndarray | None = None
        self._estimate = estimate(self.particles)
        self._bootstrapped = False

    @property
    def current_estimate(self) -> LocalizationEstimate:
        return self._estimate

    def on_odometry(self, delta: Pose2D) -> None:
        self._pending = compose(self._pending, delta)
        self._pending_dist += math.hypot(delta.x, delta.y)
        self._pending_rot += abs(delta.theta)

    def on_scan(self, scan: LaserScan) -> LocalizationEstimate:
        cfg = self.config
        moved = (self._pending_dist >= cfg.update_min_trans
                 or self._pending_rot >= cfg.update_min_rot)
        if self._bootstrapped and not moved:
            return self._estimate

        self.particles = motion_update(self.particles, self._pending,
                                       cfg.motion_noise, self.rng)
        self._pending = Pose2D(0, 0, 0)
        self._pending_dist = 0.0
        self._pending_rot = 0.0

        if self._dist_field is not None:
            self.particles = measurement_update(
                self.particles, scan, self.grid, cfg.mapping,
                sigma=cfg.likelihood_sigma, max_beams=cfg.max_beams,
                dist_field=self._dist_field)
            self.particles = resample_systematic(self.particles, self.rng)

        self._estimate = estimate(self.particles)
        integrate_scan(self.grid, self._estimate.pose, scan, cfg.mapping)
        self._dist_field = distance_field(self.grid, cfg.mapping)
        self._bootstrapped = True
        return self._estimate
