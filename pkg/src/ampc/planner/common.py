"""Pieces shared by the alternating and joint planners.

Index convention: states are stored for ``k = 0..N`` (``k = 0`` is the
current state); controls for ``i = 0..N-1``.  Command ``v_c[i]`` acts over
step ``i`` and sets the body velocity ``v[i+1]``; position advances over step
``i`` with ``v[i]``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from ..collision import SENSING_RANGE, Obstacle
from ..dynamics import ControlSequence, VehicleState, rollout_kernel, wrap_angle
from .config import PlannerConfig


@dataclass
class GuessTrajectory:
    """Controls together with the states they produce under the prediction model."""
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    v: np.ndarray
    v_c: np.ndarray
    theta_ddot: np.ndarray
    decay: np.ndarray
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.v_c.size

    def ego_points(self, offsets) -> np.ndarray:
        off = np.asarray(offsets, dtype=float)[None, :]
        c, s = np.cos(self.theta)[:, None], np.sin(self.theta)[:, None]
        return np.stack([self.x[:, None] + off * c, self.y[:, None] + off * s], axis=2)

    def state(self, k: int) -> VehicleState:
        return VehicleState(float(self.x[k]), float(self.y[k]), wrap_angle(float(self.theta[k])),
                            float(self.theta_dot[k]), float(self.v[k]))

    def states(self) -> list[VehicleState]:
        return [self.state(k) for k in range(1, self.N + 1)]


def rollout(state0: VehicleState, theta_ddot, v_c, decay, dt: float) -> GuessTrajectory:
    a = np.ascontiguousarray(theta_ddot, dtype=float)
    c = np.ascontiguousarray(v_c, dtype=float)
    m = np.ascontiguousarray(decay, dtype=float)
    x, y, th, thd, v = rollout_kernel(state0.x, state0.y, state0.theta, state0.theta_dot, state0.v,
                                      a, c, m, float(dt))
    return GuessTrajectory(x, y, th, thd, v, c.copy(), a.copy(), m.copy())


def initial_traj(v_c_guess, theta_ddot_guess, state0: VehicleState, config: PlannerConfig) -> GuessTrajectory:
    """Roll guessed controls through the prediction model.

    ``None`` for either guess gives the cold-start default: zero angular
    acceleration and commands equal to the current body velocity.
    """
    N = config.N
    c = np.full(N, state0.v) if v_c_guess is None else np.asarray(v_c_guess, dtype=float).reshape(-1)
    a = np.zeros(N) if theta_ddot_guess is None else np.asarray(theta_ddot_guess, dtype=float).reshape(-1)
    if c.size != N or a.size != N:
        raise ValueError(f"guesses must have length N={N}")
    guess = rollout(state0, a, c, config.decay(np.full(N, state0.v)), config.dt)
    return retau(guess, state0, config)


def retau(guess: GuessTrajectory, state0: VehicleState, config: PlannerConfig) -> GuessTrajectory:
    """Refresh the decay factors from the guess's body velocities and re-roll."""
    m = config.decay(guess.v[:-1])
    if np.array_equal(m, guess.decay):
        return guess
    return rollout(state0, guess.theta_ddot, guess.v_c, m, config.dt)


def shift_guess(guess: GuessTrajectory, state0: VehicleState, config: PlannerConfig) -> GuessTrajectory:
    """Warm start: drop the applied first control, repeat the last, re-roll from ``state0``."""
    a = np.concatenate([guess.theta_ddot[1:], guess.theta_ddot[-1:]])
    c = np.concatenate([guess.v_c[1:], guess.v_c[-1:]])
    return initial_traj(c, a, state0, config)


# --- constant operators ------------------------------------------------------

@functools.lru_cache(maxsize=16)
def heading_operators(N: int, dt: float):
    """``theta = theta0 + k dt theta_dot0 + G_theta a``, ``theta_dot = theta_dot0 + G_omega a``."""
    k = np.arange(N + 1)[:, None]
    j = np.arange(N)[None, :]
    lower = j < k
    g_theta = np.where(lower, dt * dt * (k - j - 0.5), 0.0)
    g_omega = np.where(lower, dt, 0.0)
    g_theta.setflags(write=False)
    g_omega.setflags(write=False)
    return g_theta, g_omega


@functools.lru_cache(maxsize=16)
def strict_cumsum(N: int):
    """``(N+1) x (N+1)`` matrix summing entries ``j < k``."""
    m = np.tril(np.ones((N + 1, N + 1)), -1)
    m.setflags(write=False)
    return m


@functools.lru_cache(maxsize=16)
def jerk_operator(N: int, dt: float):
    """Second differences of ``[anchor, v_c[0..N-1]]`` over interior points: ``D @ v_c + e0 * anchor``."""
    D = np.zeros((max(N - 1, 0), N))
    e0 = np.zeros(max(N - 1, 0))
    for i in range(N - 1):
        if i == 0:
            e0[0] = 1.0
        else:
            D[i, i - 1] = 1.0
        D[i, i] = -2.0
        D[i, i + 1] = 1.0
    D /= dt * dt
    e0 /= dt * dt
    D.setflags(write=False)
    e0.setflags(write=False)
    return D, e0


# --- costs ------------------------------------------------------------------

def j_theta(theta_ddot, config: PlannerConfig) -> float:
    a = np.asarray(theta_ddot, dtype=float)
    return config.w_smooth_theta * float(a @ a)


def j_v(v_c, anchor: float, config: PlannerConfig) -> float:
    D, e0 = jerk_operator(config.N, config.dt)
    r = D @ np.asarray(v_c, dtype=float) + e0 * anchor
    return config.w_smooth_v * float(r @ r)


def goal_heading_ref(theta_end: float, theta_f: float) -> float:
    """Goal heading unwrapped onto the branch nearest ``theta_end``."""
    return theta_end - wrap_angle(theta_end - theta_f)


def j_goal(traj: GuessTrajectory, config: PlannerConfig) -> float:
    xf, yf, thf = config.goal
    ex = traj.x[-1] - xf
    ey = traj.y[-1] - yf
    eh = wrap_angle(traj.theta[-1] - thf)
    return config.w_goal_pos * (ex * ex + ey * ey) + config.w_goal_heading * eh * eh


@dataclass
class Costs:
    J_theta: float
    J_v: float
    J_goal: float

    @property
    def smooth(self) -> float:
        return self.J_theta + self.J_v

    @property
    def total(self) -> float:
        return self.J_theta + self.J_v + self.J_goal


def costs(traj: GuessTrajectory, anchor: float, config: PlannerConfig) -> Costs:
    return Costs(j_theta(traj.theta_ddot, config), j_v(traj.v_c, anchor, config), j_goal(traj, config))


# --- obstacle scene ------------------------------------------------------------

@dataclass
class Scene:
    """Predicted obstacle circles over the horizon.

    ``pts`` has shape ``(n_circles, N+1, 2)``.  Constraints are evaluated on
    the (obstacle circle, ego circle) pairs listed in ``pair_c`` and
    ``pair_e``: vehicles are checked against the whole ego footprint,
    road-edge circles only against the centre circle.  ``group`` labels
    circles for row gating: one group per vehicle, one per road edge.
    """
    pts: np.ndarray
    radius: np.ndarray
    group: np.ndarray
    boundary: np.ndarray
    pair_c: np.ndarray
    pair_e: np.ndarray
    obstacles: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.radius.size


def build_scene(obstacles, state0: VehicleState, t: float, config: PlannerConfig) -> Scene:
    """Sense (range and visibility at ``t``) and predict at constant velocity.

    Road-edge obstacles are assumed static single circles and are batched.
    """
    N, dt = config.N, config.dt
    n_e = len(config.ego_offsets)
    center = int(np.argmin(np.abs(np.asarray(config.ego_offsets, dtype=float))))
    horizon = np.arange(N + 1) * dt
    rng = config.sensing_range if config.sensing_range else SENSING_RANGE
    kept, edges = [], []
    cx, cy, vx, vy, rad, grp = [], [], [], [], [], []
    for ob in obstacles:
        if not ob.is_visible(t):
            continue
        if ob.kind == "boundary":
            edges.append(ob)
            continue
        x, y, h, v = ob.trajectory.state(t)
        off = np.asarray(ob.offsets, dtype=float)
        ch, sh = math.cos(h), math.sin(h)
        px, py = x + off * ch, y + off * sh
        if np.min(np.hypot(px - state0.x, py - state0.y)) > rng:
            continue
        kept.append(ob)
        cx += list(px)
        cy += list(py)
        vx += [v * ch] * off.size
        vy += [v * sh] * off.size
        rad += [ob.radius_combined] * off.size
        grp += [len(kept) - 1] * off.size
    n_v = len(cx)
    if edges:
        ex = np.array([o.trajectory.x0 for o in edges])
        ey = np.array([o.trajectory.y0 for o in edges])
        inside = np.nonzero(np.hypot(ex - state0.x, ey - state0.y) <= rng)[0]
        _, side = np.unique(np.round(ey[inside], 6), return_inverse=True)
        kept += [edges[i] for i in inside]
        cx += list(ex[inside])
        cy += list(ey[inside])
        vx += [0.0] * inside.size
        vy += [0.0] * inside.size
        rad += [edges[i].radius_combined for i in inside]
        grp += list(-1 - side.reshape(-1))
    cx, cy, vx, vy = (np.asarray(a, dtype=float) for a in (cx, cy, vx, vy))
    pts = np.stack([cx[:, None] + vx[:, None] * horizon[None, :],
                    cy[:, None] + vy[:, None] * horizon[None, :]], axis=2).reshape(-1, N + 1, 2)
    boundary = np.arange(cx.size) >= n_v
    pair_c = np.concatenate([np.repeat(np.arange(n_v), n_e), np.arange(n_v, cx.size)]).astype(int)
    pair_e = np.concatenate([np.tile(np.arange(n_e), n_v), np.full(cx.size - n_v, center)]).astype(int)
    return Scene(pts, np.asarray(rad, dtype=float), np.asarray(grp, dtype=int), boundary, pair_c, pair_e, kept)


def _pair_offsets(traj: GuessTrajectory, scene: Scene, config: PlannerConfig):
    """Ego-minus-obstacle vectors for every listed pair; shape ``(P, N+1, 2)``."""
    ego = traj.ego_points(config.ego_offsets)                  # (N+1, n_e, 2)
    return ego[:, scene.pair_e, :].transpose(1, 0, 2) - scene.pts[scene.pair_c]


def step_violation(traj: GuessTrajectory, scene: Scene, config: PlannerConfig) -> np.ndarray:
    """Worst planning-radius constraint value at each step ``k = 1..N`` (``-inf`` if no obstacles)."""
    if scene.n == 0:
        return np.full(traj.N, -np.inf)
    hit = traj.cache.get("viol")
    if hit is not None and hit[0] is scene and hit[1] == config.safety_margin:
        return hit[2]
    d = _pair_offsets(traj, scene, config)
    r = scene.radius[scene.pair_c] + config.safety_margin
    val = (r[:, None] ** 2 - (d[..., 0] ** 2 + d[..., 1] ** 2)).max(axis=0)[1:]
    traj.cache["viol"] = (scene, config.safety_margin, val)
    return val


def min_clearance(traj: GuessTrajectory, scene: Scene, config: PlannerConfig, vehicles_only: bool = False) -> float:
    """Smallest center distance minus true combined radius over steps ``1..N``."""
    if scene.n == 0:
        return math.inf
    d = _pair_offsets(traj, scene, config)[:, 1:]
    cl = np.hypot(d[..., 0], d[..., 1]) - scene.radius[scene.pair_c][:, None]
    if vehicles_only:
        cl = cl[~scene.boundary[scene.pair_c]]
    return float(cl.min(initial=math.inf))


def collision_rows(traj: GuessTrajectory, scene: Scene, config: PlannerConfig):
    """Gated linearisation of the collision constraints around ``traj``.

    Vehicle circles: every pair within ``gate_near`` of touching, plus the
    closest pair per (vehicle, step) within ``gate_far``.  Road-edge circles:
    one row per (edge, step) within ``gate_near``, built on an edge circle
    slid along the edge to sit level with the ego.  That is the limit of a
    dense chain and never looser than the real one; a row on a real circle
    just ahead of the ego would also block forward motion.  Returns
    ``step (1..N), ego_circle, grad_x, grad_y, value`` per row, using the
    planning radius.
    """
    if scene.n == 0:
        z = np.zeros(0)
        return np.zeros(0, int), np.zeros(0, int), z, z, z
    d = _pair_offsets(traj, scene, config)                      # (P, N+1, 2)
    edge = scene.boundary[scene.pair_c]
    d[edge, :, 0] = 0.0                                         # roads run along +x
    r = scene.radius[scene.pair_c] + config.safety_margin
    gap = np.hypot(d[..., 0], d[..., 1]) - r[:, None]
    gap[:, 0] = np.inf
    keep = (gap < config.gate_near) & ~edge[:, None]
    pgroup = scene.group[scene.pair_c]
    steps = np.arange(gap.shape[1])
    for gid in np.unique(pgroup):
        sel = np.nonzero(pgroup == gid)[0]
        gate = config.gate_near if gid < 0 else config.gate_far
        best = np.argmin(gap[sel], axis=0)
        ks = np.nonzero(gap[sel[best], steps] < gate)[0]
        keep[sel[best[ks]], ks] = True
    p, k = np.nonzero(keep)
    dd = d[p, k]
    val = r[p] ** 2 - (dd[:, 0] ** 2 + dd[:, 1] ** 2)
    return k, scene.pair_e[p], -2.0 * dd[:, 0], -2.0 * dd[:, 1], val


def merit(traj: GuessTrajectory, scene: Scene, anchor: float, w: float, config: PlannerConfig):
    """Total cost plus the exact per-step penalty; also returns the worst violation.

    Violations up to ``violation_tol`` are not penalised, matching the
    threshold that triggers penalty growth.
    """
    viol = step_violation(traj, scene, config)
    pos = np.maximum(viol - config.violation_tol, 0.0)
    worst = float(viol.max(initial=-np.inf))
    return costs(traj, anchor, config).total + w * float(pos.sum()), worst


@dataclass
class PlannerResult:
    controls: ControlSequence
    trajectory: list
    iterations: int
    converged: bool
    max_violation: float
    costs: Costs
    wall_time: float
    guess: GuessTrajectory = field(repr=False, default=None)
    min_clearance: float = math.inf
    weights: tuple = (0.0, 0.0)
    qp_log: list = field(repr=False, default_factory=list)
    trace: list = field(repr=False, default_factory=list)
    qp_solves: int = 0
