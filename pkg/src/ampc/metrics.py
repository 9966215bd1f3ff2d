"""Comparison metrics computed from closed-loop traces.

Everything here is a pure function of a trace (a list of
:class:`~ampc.sim.TraceRecord` or the dicts returned by
:func:`~ampc.sim.read_trace`) plus, optionally, the scripted obstacles and
the transition windows of the scenario.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .sim import trace_arrays

DEFAULT_EGO_OFFSETS = (-1.5, 0.0, 1.5)
SETTLE_WINDOW = 1.0   # seconds at the end of a transition used as the settled velocity


@dataclass
class MetricsReport:
    min_inter_vehicle_distance: float
    min_distance_per_obstacle: dict = field(default_factory=dict)
    velocity_overshoot: float = 0.0          # percent, worst transition
    settling_oscillation: float = 0.0        # RMS of d2v/dt2 inside transitions, m/s^3
    J_v: float = 0.0
    J_theta: float = 0.0
    iters_mean: float = 0.0
    iters_max: int = 0
    wall_ms_mean: float = 0.0
    wall_ms_max: float = 0.0
    collision: bool = False
    ticks: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _windows(t: np.ndarray, transitions):
    """``(mask, target)`` per window; ``target`` is None when the window does not name one."""
    if transitions is None or len(transitions) == 0:
        return [(np.ones(t.size, dtype=bool), None)]
    eps = 1e-9
    return [((t >= w[0] - eps) & (t <= w[1] + eps), w[2] if len(w) > 2 else None) for w in transitions]


def overshoot_percent(t: np.ndarray, v: np.ndarray, settle: float = SETTLE_WINDOW,
                      target: float | None = None) -> float:
    """Peak excursion past the target velocity, relative to the size of the change.

    The initial velocity is the first sample.  Excursions are measured in the
    direction of the change, so a braking transition that dips below its
    target counts as overshoot.  Without an explicit ``target`` the settled
    value is used: the mean over the last ``settle`` seconds, with the peak
    taken before that window.
    """
    if v.size < 2:
        return 0.0
    if target is None:
        tail = t >= t[-1] - settle - 1e-9
        target = float(v[tail].mean())
        scan = v[~tail] if np.any(~tail) else v
    else:
        scan = v
    span = target - float(v[0])
    if abs(span) < 1e-6:
        return 0.0
    peak = float(np.max(np.sign(span) * (scan - target)))
    return max(0.0, peak / abs(span)) * 100.0


def second_difference(v: np.ndarray, dt: float) -> np.ndarray:
    if v.size < 3:
        return np.zeros(0)
    return (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dt * dt)


def executed_costs(v_cmd: np.ndarray, theta_ddot: np.ndarray, dt: float,
                   w_v: float = 1.0, w_theta: float = 1.0) -> tuple[float, float]:
    """Smoothness costs of the applied command history: ``(J_v, J_theta)``."""
    jerk = second_difference(np.asarray(v_cmd, dtype=float), dt)
    a = np.asarray(theta_ddot, dtype=float)
    return w_v * float(jerk @ jerk), w_theta * float(a @ a)


def obstacle_distances(cols: dict, obstacles, ego_offsets=DEFAULT_EGO_OFFSETS) -> dict:
    """Smallest footprint gap (center distance minus combined radius) to each vehicle."""
    off = np.asarray(ego_offsets, dtype=float)
    ex = cols["x"][:, None] + off[None, :] * np.cos(cols["theta"])[:, None]
    ey = cols["y"][:, None] + off[None, :] * np.sin(cols["theta"])[:, None]
    out = {}
    for ob in obstacles:
        if getattr(ob, "kind", "vehicle") == "boundary":
            continue
        best = math.inf
        for k, tk in enumerate(cols["t"]):
            c = ob.circles_at(float(tk))
            d = np.hypot(ex[k][:, None] - c[None, :, 0], ey[k][:, None] - c[None, :, 1]) - ob.radius_combined
            best = min(best, float(d.min()))
        out[ob.id] = best
    return out


def compute_metrics(trace, obstacles=None, transitions=None, ego_offsets=DEFAULT_EGO_OFFSETS,
                    w_v: float = 1.0, w_theta: float = 1.0) -> MetricsReport:
    """Summarise a trace.

    Distances come from actual plant states: with ``obstacles`` they are
    recomputed per vehicle, otherwise the trace's ``min_clearance`` column
    (already an actual-state measure) is used.  Overshoot and oscillation are
    evaluated inside each ``[t_start, t_end(, target_speed)]`` transition
    window, or over the whole trace when no windows are given.
    """
    cols = trace_arrays(trace)
    n = cols["t"].size
    if n == 0:
        return MetricsReport(math.inf)
    dt = float(np.median(np.diff(cols["t"]))) if n > 1 else 0.1
    per_obstacle = {}
    if obstacles is not None:
        per_obstacle = obstacle_distances(cols, obstacles, ego_offsets)
        dmin = min(per_obstacle.values(), default=math.inf)
    else:
        dmin = float(np.min(cols["min_clearance"]))

    over, second = 0.0, []
    for mask, target in _windows(cols["t"], transitions):
        if mask.sum() < 2:
            continue
        v = cols["v_body"][mask]
        over = max(over, overshoot_percent(cols["t"][mask], v, target=target))
        second.append(second_difference(v, dt))
    d2 = np.concatenate(second) if second else np.zeros(0)
    osc = float(np.sqrt(np.mean(d2 * d2))) if d2.size else 0.0

    J_v, J_theta = executed_costs(cols["v_cmd"], cols["theta_ddot_cmd"], dt, w_v, w_theta)
    iters = cols["iters"]
    wall = cols["wall_ms"]
    return MetricsReport(
        min_inter_vehicle_distance=dmin,
        min_distance_per_obstacle=per_obstacle,
        velocity_overshoot=over,
        settling_oscillation=osc,
        J_v=J_v,
        J_theta=J_theta,
        iters_mean=float(iters.mean()),
        iters_max=int(iters.max()),
        wall_ms_mean=float(wall.mean()),
        wall_ms_max=float(wall.max()),
        collision=bool(dmin < 0.0),
        ticks=n,
    )
