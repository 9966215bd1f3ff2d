"""Circle-overlap collision constraints and their linearisation.

A vehicle footprint is a row of circles along its heading.  For one ego
circle ``p`` and one obstacle circle ``q`` with combined radius ``R`` the
constraint is ``-|p - q|^2 + R^2 <= 0``.  Its left side is concave in ``p``,
so the first-order expansion around any guess upper-bounds it everywhere:
satisfying the affine row is sufficient for the true constraint whenever
``p`` itself is affine in the decision variables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ScenarioError

SENSING_RANGE = 70.0


# --- motion of scripted agents ---------------------------------------------

@dataclass(frozen=True)
class MotionScript:
    """Straight-line motion with piecewise-constant acceleration.

    ``segments`` holds ``(t_start, t_end, accel)`` triples; speed is clamped
    at zero (a braking vehicle stops, it does not reverse).
    """
    x0: float
    y0: float
    heading: float = 0.0
    speed: float = 0.0
    segments: tuple = ()

    def _speed_and_distance(self, t: float):
        v, s, clock = self.speed, 0.0, 0.0
        for t0, t1, acc in sorted(self.segments):
            if t <= t0:
                break
            # cruise up to the segment start
            if t0 > clock:
                s += v * (t0 - clock)
                clock = t0
            t_end = min(t, t1)
            dur = t_end - clock
            if dur <= 0:
                continue
            if acc < 0 and v + acc * dur < 0:
                t_stop = -v / acc
                s += v * t_stop + 0.5 * acc * t_stop ** 2
                v = 0.0
            else:
                s += v * dur + 0.5 * acc * dur ** 2
                v += acc * dur
            clock = t_end
        if t > clock:
            s += v * (t - clock)
        return v, s

    def state(self, t: float):
        """``(x, y, heading, speed)`` at time ``t``."""
        v, s = self._speed_and_distance(t)
        c, sn = math.cos(self.heading), math.sin(self.heading)
        return self.x0 + s * c, self.y0 + s * sn, self.heading, v

    def __call__(self, t: float):
        x, y, _, _ = self.state(t)
        return x, y


@dataclass(frozen=True)
class Obstacle:
    """A scripted agent seen by the planner.

    ``radius_combined`` is the ego circle radius plus this agent's circle
    radius.  ``offsets`` place the agent's circles along its heading relative
    to the reference point returned by ``trajectory``.
    """
    id: str
    trajectory: MotionScript
    radius_combined: float
    visible_from: float = 0.0
    offsets: tuple = (0.0,)
    kind: str = "vehicle"

    def __post_init__(self):
        if not self.radius_combined > 0:
            raise ScenarioError(f"obstacle {self.id}: radius_combined must be positive")

    def circles_at(self, t: float) -> np.ndarray:
        x, y, h, _ = self.trajectory.state(t)
        off = np.asarray(self.offsets, dtype=float)
        return np.stack([x + off * math.cos(h), y + off * math.sin(h)], axis=1)

    def predict(self, t_now: float, times: np.ndarray) -> np.ndarray:
        """Constant-velocity extrapolation of every circle; shape ``(n_circles, len(times), 2)``."""
        x, y, h, v = self.trajectory.state(t_now)
        dt = np.asarray(times, dtype=float) - t_now
        cx = x + v * math.cos(h) * dt
        cy = y + v * math.sin(h) * dt
        off = np.asarray(self.offsets, dtype=float)[:, None]
        return np.stack([cx[None, :] + off * math.cos(h), cy[None, :] + off * math.sin(h)], axis=2)

    def is_visible(self, t: float) -> bool:
        return t >= self.visible_from


def sensed(obstacles: Sequence[Obstacle], ego_xy, t: float, sensing_range: float = SENSING_RANGE):
    """Obstacles visible at ``t`` with at least one circle within sensing range."""
    ex, ey = ego_xy
    out = []
    for ob in obstacles:
        if not ob.is_visible(t):
            continue
        c = ob.circles_at(t)
        if np.min(np.hypot(c[:, 0] - ex, c[:, 1] - ey)) <= sensing_range:
            out.append(ob)
    return out


# --- constraint evaluation -------------------------------------------------

def eval_constraint(ego_xy, obs_xy, R):
    """``R^2 - |ego - obs|^2``; non-positive means no overlap."""
    ego = np.asarray(ego_xy, dtype=float)
    obs = np.asarray(obs_xy, dtype=float)
    d = ego - obs
    val = R * R - np.sum(d * d, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def clearance(ego_xy, obs_xy, R):
    """Center distance minus combined radius (negative on overlap)."""
    d = np.asarray(ego_xy, dtype=float) - np.asarray(obs_xy, dtype=float)
    return np.hypot(d[..., 0], d[..., 1]) - R


@dataclass
class LinearizedConstraint:
    """Rows ``offset + grad_x (x - x_hat) + grad_y (y - y_hat) <= 0``."""
    obstacle: np.ndarray
    step: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray
    offset: np.ndarray
    guess: np.ndarray = field(repr=False)

    def __len__(self):
        return self.step.size

    def affine_value(self, xy: np.ndarray) -> np.ndarray:
        """Evaluate every row at trajectory ``xy`` (shape ``(T, 2)``)."""
        p = np.asarray(xy, dtype=float)[self.step]
        g = self.guess[self.step]
        return self.offset + self.grad_x * (p[:, 0] - g[:, 0]) + self.grad_y * (p[:, 1] - g[:, 1])


def linearize(guess_traj, obstacles: Sequence[Obstacle], times, now: float | None = None) -> LinearizedConstraint:
    """Linearise every (obstacle circle, step) pair around a guess trajectory.

    The guess is the track of a single ego circle.  Obstacles are predicted
    with constant velocity from ``now`` (default ``times[0]``); those not yet
    visible at ``now`` are skipped.
    """
    guess = np.asarray(guess_traj, dtype=float).reshape(-1, 2)
    times = np.asarray(times, dtype=float).reshape(-1)
    if guess.shape[0] != times.size:
        raise ValueError("guess trajectory and times must have the same length")
    now = float(times[0]) if now is None else now
    obs_idx, steps, gx, gy, off = [], [], [], [], []
    for i, ob in enumerate(obstacles):
        if not ob.is_visible(now):
            continue
        tracks = ob.predict(now, times)
        for track in tracks:
            d = guess - track
            obs_idx.append(np.full(times.size, i))
            steps.append(np.arange(times.size))
            gx.append(-2.0 * d[:, 0])
            gy.append(-2.0 * d[:, 1])
            off.append(ob.radius_combined ** 2 - np.sum(d * d, axis=1))
    cat = (lambda a, dtype=float: np.concatenate(a).astype(dtype) if a else np.zeros(0, dtype=dtype))
    return LinearizedConstraint(cat(obs_idx, int), cat(steps, int), cat(gx), cat(gy), cat(off), guess)


def pair_rows(ego_pts: np.ndarray, obs_pts: np.ndarray, radii: np.ndarray, gate: float):
    """Vectorised linearisation for the planners.

    ``ego_pts``: ``(T, n_e, 2)`` guess positions of ego circles;
    ``obs_pts``: ``(n_o, T, 2)`` predicted obstacle circles; ``radii``:
    ``(n_o,)`` planning radii.  Only pairs whose guess distance is below
    ``radius + gate`` are returned.  Output arrays are indexed by row:
    ``step, ego_circle, grad_x, grad_y, offset``.
    """
    if obs_pts.shape[0] == 0:
        z = np.zeros(0)
        return np.zeros(0, int), np.zeros(0, int), z, z, z
    d = ego_pts[None, :, :, :] - obs_pts[:, :, None, :]      # (n_o, T, n_e, 2)
    dist2 = d[..., 0] ** 2 + d[..., 1] ** 2
    r = radii[:, None, None]
    mask = dist2 < (r + gate) ** 2
    o, k, e = np.nonzero(mask)
    dd = d[o, k, e]
    return k, e, -2.0 * dd[:, 0], -2.0 * dd[:, 1], radii[o] ** 2 - dist2[o, k, e]


def max_violation_per_step(ego_pts: np.ndarray, obs_pts: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Largest ``R^2 - dist^2`` at each step over all pairs (``-inf`` if none)."""
    T = ego_pts.shape[0]
    if obs_pts.shape[0] == 0:
        return np.full(T, -np.inf)
    d = ego_pts[None, :, :, :] - obs_pts[:, :, None, :]
    val = radii[:, None, None] ** 2 - (d[..., 0] ** 2 + d[..., 1] ** 2)
    return val.max(axis=(0, 2))


def min_clearance_per_step(ego_pts: np.ndarray, obs_pts: np.ndarray, radii: np.ndarray) -> np.ndarray:
    T = ego_pts.shape[0]
    if obs_pts.shape[0] == 0:
        return np.full(T, np.inf)
    d = ego_pts[None, :, :, :] - obs_pts[:, :, None, :]
    cl = np.hypot(d[..., 0], d[..., 1]) - radii[:, None, None]
    return cl.min(axis=(0, 2))


# --- road geometry -----------------------------------------------------------

@dataclass(frozen=True)
class RoadGeometry:
    """Straight road along +x; lane 0 is centred on ``y = 0``, lanes stack toward +y."""
    lanes: int = 2
    lane_width: float = 3.5
    length: float = 200.0
    x_start: float = 0.0

    @property
    def y_min(self) -> float:
        return -0.5 * self.lane_width

    @property
    def y_max(self) -> float:
        return (self.lanes - 0.5) * self.lane_width

    def lane_center(self, lane: int) -> float:
        return lane * self.lane_width


def boundary_spacing(boundary_radius: float, ego_radius: float) -> float:
    """Largest spacing at which the ego circle cannot slip between two boundary circles."""
    R = boundary_radius + ego_radius
    return 2.0 * math.sqrt(R * R - ego_radius * ego_radius)


def road_boundary_obstacles(lane_geometry: RoadGeometry, ego_radius: float = 1.0,
                            boundary_radius: float = 0.5) -> list[Obstacle]:
    """Rows of static circles just outside both road edges."""
    g = lane_geometry
    if g.lane_width <= 2.0 * ego_radius:
        raise ScenarioError(f"lane width {g.lane_width} m does not fit a footprint of "
                            f"diameter {2 * ego_radius} m")
    if g.length <= 0:
        return []
    spacing = boundary_spacing(boundary_radius, ego_radius)
    count = math.ceil(g.length / spacing) + 1
    xs = g.x_start + np.linspace(0.0, g.length, count)
    R = boundary_radius + ego_radius
    out = []
    for side, y in (("right", g.y_min - boundary_radius), ("left", g.y_max + boundary_radius)):
        for i, x in enumerate(xs):
            out.append(Obstacle(f"edge-{side}-{i}", MotionScript(float(x), y), R, kind="boundary"))
    return out
