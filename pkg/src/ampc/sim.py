"""Closed-loop receding-horizon simulation.

Each tick senses the scripted obstacles, warm-starts the planner from the
previous solution shifted by one step, applies the first control to the
plant and records a :class:`TraceRecord`.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .collision import Obstacle
from .dynamics import FirstOrder, Plant, VehicleState
from .errors import PlannerFailure
from .planner.am import plan
from .planner.common import GuessTrajectory, PlannerResult, initial_traj, shift_guess
from .planner.config import PlannerConfig
from .planner.joint import plan_joint

log = logging.getLogger("ampc.sim")

PLANNERS: dict[str, Callable] = {"am": plan, "joint": plan_joint}

TRACE_COLUMNS = ("t", "x", "y", "theta", "theta_dot", "v_body", "v_cmd", "theta_ddot_cmd",
                 "min_clearance", "iters", "wall_ms", "degraded_flag")


@dataclass
class TraceRecord:
    t: float
    x: float
    y: float
    theta: float
    theta_dot: float
    v_body: float
    v_cmd: float
    theta_ddot_cmd: float
    min_clearance: float        # actual ego footprint vs actual vehicles, true radii
    iters: int
    wall_ms: float
    degraded_flag: bool
    collision: bool = False
    plan_clearance: float = math.inf   # planner's own rollout, including road edges
    plan_converged: bool = False
    qp_kkt: tuple = field(default=(), repr=False)

    def row(self):
        return [getattr(self, c) for c in TRACE_COLUMNS]


@dataclass
class SimState:
    t: float
    ego: VehicleState
    plant: Plant
    obstacles: list
    last_plan: PlannerResult | None = None
    last_command: float | None = None
    goal_fn: Callable | None = None

    @property
    def plant_model(self):
        return self.plant.model


def actual_clearance(ego: VehicleState, obstacles, t: float, config: PlannerConfig) -> float:
    """Center distance minus combined radius between the real ego footprint and real vehicles at ``t``."""
    off = np.asarray(config.ego_offsets, dtype=float)
    ex = ego.x + off * math.cos(ego.theta)
    ey = ego.y + off * math.sin(ego.theta)
    best = math.inf
    for ob in obstacles:
        if ob.kind == "boundary":
            continue
        c = ob.circles_at(t)
        d = np.hypot(ex[:, None] - c[None, :, 0], ey[:, None] - c[None, :, 1]) - ob.radius_combined
        best = min(best, float(d.min()))
    return best


def fallback_command(sim: SimState, config: PlannerConfig) -> tuple[float, float]:
    """Decelerate at ``a_min`` with no change in heading rate."""
    prev = sim.ego.v if sim.last_command is None else sim.last_command
    return max(prev + config.a_min * config.dt, 0.0), 0.0


def braking_guess(ego: VehicleState, config: PlannerConfig) -> GuessTrajectory:
    """Straight-ahead guess that sheds speed at half the braking limit."""
    k = np.arange(1, config.N + 1)
    c = np.maximum(ego.v + 0.5 * config.a_min * config.dt * k, 0.0)
    return initial_traj(c, None, ego, config)


def swerve_guess(ego: VehicleState, config: PlannerConfig, lateral: float) -> GuessTrajectory:
    """Constant-speed S-curve whose lateral displacement is roughly ``lateral`` metres.

    Gives the angular layer a nonzero lateral gradient when an obstacle sits
    exactly on the straight-ahead line, where the linearised rows are blind
    to steering.
    """
    N = config.N
    q = max(N // 4, 1)
    shape = np.zeros(N)
    shape[:q], shape[q:3 * q], shape[3 * q:4 * q] = 1.0, -1.0, 1.0
    c = np.full(N, ego.v)
    damp = initial_traj(c, np.zeros(N), ego, config)
    probe = 1e-3  # small enough that lateral offset is linear in amplitude
    unit = initial_traj(c, probe * shape, ego, config)
    gain = ((unit.y[-1] - damp.y[-1]) * math.cos(ego.theta)
            - (unit.x[-1] - damp.x[-1]) * math.sin(ego.theta)) / probe
    if abs(gain) < 1e-9:
        return damp
    amp = lateral / gain
    cap = min(config.theta_ddot_max, -config.theta_ddot_min, config.theta_dot_max / (q * config.dt))
    return initial_traj(c, np.clip(amp, -cap, cap) * shape, ego, config)


def restart_guesses(ego: VehicleState, config: PlannerConfig, lane_width: float = 3.5):
    yield braking_guess(ego, config)
    yield swerve_guess(ego, config, lane_width)
    yield swerve_guess(ego, config, -lane_width)


def plan_with_restart(plan_fn: Callable, ego: VehicleState, obstacles, config: PlannerConfig,
                      warm: GuessTrajectory | None, t: float, v_c_prev: float | None) -> PlannerResult:
    """Plan from ``warm``; while the result still violates clearance, retry from other guesses.

    A shifted plan can sit in a local minimum that threads between two
    obstacles (typically right after a vehicle comes into view), and a
    straight guess aimed at a vehicle has no lateral gradient at all.  The
    retries are a braking guess and a swerve to either side; the result with
    the smallest violation is kept and the iteration counts and wall times
    of every attempt are summed.
    """
    best = res = plan_fn(ego, obstacles, config, warm=warm, t=t, v_c_prev=v_c_prev)
    iters, wall, qp_log = res.iterations, res.wall_time, list(res.qp_log)
    if res.max_violation <= config.violation_tol:
        return res
    for guess in restart_guesses(ego, config):
        alt = plan_fn(ego, obstacles, config, warm=guess, t=t, v_c_prev=v_c_prev)
        iters, wall, qp_log = iters + alt.iterations, wall + alt.wall_time, qp_log + alt.qp_log
        if alt.max_violation < best.max_violation:
            best = alt
        if best.max_violation <= config.violation_tol:
            break
    return replace(best, iterations=iters, wall_time=wall, qp_log=qp_log, qp_solves=len(qp_log))


def tick(sim: SimState, planner: str | Callable, config: PlannerConfig) -> tuple[SimState, TraceRecord]:
    """Plan from the current state, apply the first control for one period."""
    plan_fn = PLANNERS[planner] if isinstance(planner, str) else planner
    if sim.goal_fn is not None:
        config = replace(config, goal=sim.goal_fn(sim.ego, sim.t))
    warm = None
    if sim.last_plan is not None:
        warm = shift_guess(sim.last_plan.guess, sim.ego, config)
    degraded = False
    try:
        res = plan_with_restart(plan_fn, sim.ego, sim.obstacles, config, warm, sim.t, sim.last_command)
        v_cmd, a_cmd = float(res.controls.v_c[0]), float(res.controls.theta_ddot[0])
        iters, wall, plan_cl, conv = res.iterations, res.wall_time, res.min_clearance, res.converged
        kkt = tuple(q["kkt"] for q in res.qp_log)
    except PlannerFailure as exc:
        log.warning("t=%.2f planner failure: %s", sim.t, exc)
        res = None
        v_cmd, a_cmd = fallback_command(sim, config)
        iters, wall, plan_cl, conv, kkt = 0, 0.0, math.nan, False, ()
        degraded = True
    clearance = actual_clearance(sim.ego, sim.obstacles, sim.t, config)
    rec = TraceRecord(sim.t, sim.ego.x, sim.ego.y, sim.ego.theta, sim.ego.theta_dot, sim.ego.v,
                      v_cmd, a_cmd, clearance, iters, 1e3 * wall, degraded, clearance < 0.0,
                      plan_clearance=plan_cl, plan_converged=conv, qp_kkt=kkt)
    ego = sim.plant.step(sim.ego, v_cmd, a_cmd, config.dt)
    nxt = SimState(sim.t + config.dt, ego, sim.plant, sim.obstacles, res, v_cmd, sim.goal_fn)
    return nxt, rec


def run(state0: VehicleState, obstacles, config: PlannerConfig, duration: float, planner: str = "am",
        plant_model=None, goal_fn: Callable | None = None, ticks: int | None = None,
        on_tick: Callable | None = None) -> list[TraceRecord]:
    """Tick from ``t = 0`` to ``duration`` inclusive (``duration / dt + 1`` records).

    A zero duration produces an empty trace.
    """
    if duration <= 0 and ticks is None:
        return []
    n = int(round(duration / config.dt)) + 1 if ticks is None else int(ticks)
    plant = Plant(FirstOrder(0.5) if plant_model is None else plant_model)
    sim = SimState(0.0, state0, plant, list(obstacles), goal_fn=goal_fn)
    trace = []
    for i in range(n):
        sim, rec = tick(sim, planner, config)
        sim.t = (i + 1) * config.dt  # avoid drift from repeated addition
        trace.append(rec)
        if on_tick is not None:
            on_tick(sim, rec)
    return trace


def write_trace(trace, path) -> None:
    """Header line then one comma-separated record per tick, floats at 9 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for rec in trace:
            w.writerow([_fmt(v) for v in rec.row()])


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {k: float(v) for k, v in r.items() if k not in ("iters", "degraded_flag")}
        d["iters"] = int(r["iters"])
        d["degraded_flag"] = r["degraded_flag"] == "1"
        out.append(d)
    return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v) + 0.0:.9g}"  # no "-0"


def trace_arrays(trace) -> dict[str, np.ndarray]:
    """Column arrays from a list of :class:`TraceRecord` or of dicts."""
    if not trace:
        return {c: np.zeros(0) for c in TRACE_COLUMNS}
    if dataclasses.is_dataclass(trace[0]):
        return {c: np.array([getattr(r, c) for r in trace], dtype=float) for c in TRACE_COLUMNS}
    return {c: np.array([r[c] for r in trace], dtype=float) for c in TRACE_COLUMNS}
