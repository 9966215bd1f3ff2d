"""Vehicle motion model, actuator responses and time-constant identification.

The planner state is ``(x, y, theta, theta_dot, v)`` where ``v`` is the body
velocity actually realised by the drivetrain.  Commanded velocities reach the
body through an actuator model; for the first-order model the body velocity
after ``n`` steps is affine in the commands, which is what makes the velocity
layer of the planner an exact convex problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ._accel import kernel
from .errors import IdentificationError, InvalidInputError, InvalidParameterError

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    return math.pi if r == -math.pi else r


def wrap_angles(a: np.ndarray) -> np.ndarray:
    r = np.remainder(np.asarray(a, dtype=float) + math.pi, TWO_PI) - math.pi
    return np.where(r == -math.pi, math.pi, r)


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0
    v: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.theta_dot, self.v])


@dataclass(frozen=True)
class ControlSequence:
    v_c: np.ndarray
    theta_ddot: np.ndarray
    dt: float
    v0: float

    def __post_init__(self):
        v_c = np.asarray(self.v_c, dtype=float).reshape(-1)
        th = np.asarray(self.theta_ddot, dtype=float).reshape(-1)
        if v_c.size < 1 or v_c.size != th.size:
            raise InvalidInputError("v_c and theta_ddot must have the same length >= 1")
        if not self.dt > 0:
            raise InvalidParameterError("dt must be positive")
        object.__setattr__(self, "v_c", v_c)
        object.__setattr__(self, "theta_ddot", th)

    def __len__(self):
        return self.v_c.size


# --- actuator models -------------------------------------------------------

@dataclass(frozen=True)
class FirstOrder:
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class LinearRamp:
    """Body velocity ramps linearly to the command over one control period."""


@dataclass(frozen=True)
class SecondOrder:
    omega_n: float = 2.0
    zeta: float = 0.7

    def __post_init__(self):
        if not (self.omega_n > 0 and self.zeta > 0):
            raise InvalidParameterError("omega_n and zeta must be positive")


ActuatorModel = Union[FirstOrder, LinearRamp, SecondOrder]


@dataclass(frozen=True)
class ConstantTau:
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidParameterError("tau must be positive")


@dataclass(frozen=True)
class PiecewiseLinearTau:
    breakpoints: tuple = field(default_factory=tuple)

    def __post_init__(self):
        bp = tuple((float(v), float(t)) for v, t in self.breakpoints)
        if not bp:
            raise InvalidParameterError("at least one breakpoint required")
        vs = [v for v, _ in bp]
        if any(b <= a for a, b in zip(vs, vs[1:])):
            raise InvalidParameterError("breakpoint velocities must be strictly increasing")
        if any(t <= 0 for _, t in bp):
            raise InvalidParameterError("tau values must be positive")
        object.__setattr__(self, "breakpoints", bp)


TauSchedule = Union[ConstantTau, PiecewiseLinearTau]


def tau_at(schedule: TauSchedule, v):
    """Time constant at body velocity ``v`` (scalar or array); clamps outside the table."""
    if isinstance(schedule, ConstantTau):
        if np.ndim(v):
            return np.full(np.shape(v), schedule.tau)
        return schedule.tau
    vs, ts = zip(*schedule.breakpoints)
    out = np.interp(v, vs, ts)
    return out if np.ndim(v) else float(out)


# --- motion model ----------------------------------------------------------

def _check_finite(*vals):
    for val in vals:
        if not np.all(np.isfinite(val)):
            raise InvalidInputError(f"non-finite input: {val!r}")


def propagate_state(state: VehicleState, v: float, theta_ddot: float, dt: float) -> VehicleState:
    """One step of the discrete non-holonomic model, heading wrapped to (-pi, pi]."""
    _check_finite(state.as_array(), v, theta_ddot, dt)
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    x = state.x + v * math.cos(state.theta) * dt
    y = state.y + v * math.sin(state.theta) * dt
    theta = state.theta + state.theta_dot * dt + 0.5 * theta_ddot * dt * dt
    theta_dot = state.theta_dot + theta_ddot * dt
    return VehicleState(x, y, wrap_angle(theta), theta_dot, v)


def first_order_response(v_prev: float, v_c: float, tau: float, t_rel: float) -> float:
    if not tau > 0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    if t_rel < 0:
        raise InvalidParameterError("t_rel must be non-negative")
    return v_c + (v_prev - v_c) * math.exp(-t_rel / tau)


def decay_factors(model, dt: float, n: int, v_profile=None) -> np.ndarray:
    """Per-step decay ``m_i = exp(-dt/tau)`` for a planner model.

    ``model`` is a :class:`FirstOrder`, :class:`LinearRamp` (``m = 0``: the
    body reaches the command at the end of the step) or a tau schedule.  A
    velocity-dependent schedule is evaluated at ``v_profile`` (body velocity
    at the start of each step).
    """
    if isinstance(model, LinearRamp):
        return np.zeros(n)
    if isinstance(model, FirstOrder):
        return np.full(n, math.exp(-dt / model.tau))
    if isinstance(model, (ConstantTau, PiecewiseLinearTau)):
        if v_profile is None or isinstance(model, ConstantTau):
            tau = tau_at(model, 0.0) if isinstance(model, ConstantTau) else tau_at(model, np.zeros(n))
            return np.exp(-dt / np.broadcast_to(tau, (n,)))
        return np.exp(-dt / tau_at(model, np.asarray(v_profile[:n], dtype=float)))
    raise InvalidParameterError(f"no decay factors for {model!r}")


@kernel
def _chain_recursion(v0, v_c, m):
    n = v_c.shape[0]
    out = np.empty(n)
    v = v0
    for i in range(n):
        v = m[i] * v + (1.0 - m[i]) * v_c[i]
        out[i] = v
    return out


@kernel
def _chain_closed_form(m):
    # v_i = sum_j v_c[j] (1 - m_j) prod_{l=j+1..i} m_l + v0 prod_{l=0..i} m_l
    n = m.shape[0]
    gain = np.zeros((n, n))
    free = np.empty(n)
    for j in range(n):
        prod = 1.0 - m[j]
        for i in range(j, n):
            if i > j:
                prod *= m[i]
            gain[i, j] = prod
    prod = 1.0
    for i in range(n):
        prod *= m[i]
        free[i] = prod
    return free, gain


def velocity_chain(v0: float, v_c: Sequence[float], dt: float, tau, closed_form: bool = False) -> np.ndarray:
    """Body velocity at the end of each of ``n`` steps under commands ``v_c``.

    ``tau`` is a scalar time constant or an array of per-step time constants.
    ``closed_form`` evaluates the product formula instead of the recursion;
    both must agree to rounding.
    """
    v_c = np.asarray(v_c, dtype=float).reshape(-1)
    if v_c.size == 0:
        raise InvalidInputError("empty command sequence")
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    tau = np.broadcast_to(np.asarray(tau, dtype=float), v_c.shape)
    if np.any(tau <= 0):
        raise InvalidParameterError("tau must be positive")
    m = np.exp(-dt / tau)
    if closed_form:
        free, gain = _chain_closed_form(m)
        return free * v0 + gain @ v_c
    return _chain_recursion(float(v0), v_c, m)


def chain_affine_map(v0: float, m: np.ndarray):
    """Affine map ``v[0..n] = offset + gain @ v_c`` including the current velocity as row 0."""
    m = np.ascontiguousarray(m, dtype=float)
    free, gain = _chain_closed_form(m)
    n = m.size
    offset = np.empty(n + 1)
    offset[0] = v0
    offset[1:] = free * v0
    full = np.zeros((n + 1, n))
    full[1:] = gain
    return offset, full


@kernel
def rollout_kernel(x0, y0, th0, thd0, v0, thdd, v_c, m, dt):
    """Roll the prediction model; returns arrays of length N+1 (index 0 = now).

    Position advances with the body velocity held at the start of the step,
    heading is left unwrapped so that it can be linearised smoothly.
    """
    n = thdd.shape[0]
    x = np.empty(n + 1)
    y = np.empty(n + 1)
    th = np.empty(n + 1)
    thd = np.empty(n + 1)
    v = np.empty(n + 1)
    x[0] = x0
    y[0] = y0
    th[0] = th0
    thd[0] = thd0
    v[0] = v0
    for k in range(n):
        x[k + 1] = x[k] + v[k] * np.cos(th[k]) * dt
        y[k + 1] = y[k] + v[k] * np.sin(th[k]) * dt
        th[k + 1] = th[k] + thd[k] * dt + 0.5 * thdd[k] * dt * dt
        thd[k + 1] = thd[k] + thdd[k] * dt
        v[k + 1] = m[k] * v[k] + (1.0 - m[k]) * v_c[k]
    return x, y, th, thd, v


# --- plant -------------------------------------------------------------------

_FIRST, _RAMP, _SECOND = 0, 1, 2


@kernel
def _plant_kernel(x, y, th, thd, v, acc, v_c, thdd, kind, p1, p2, dt, nsub):
    h = dt / nsub
    v_start = v
    decay = 0.0
    if kind == 0:
        decay = np.exp(-h / p1)
    for j in range(nsub):
        x += v * np.cos(th) * h
        y += v * np.sin(th) * h
        th += thd * h + 0.5 * thdd * h * h
        thd += thdd * h
        if kind == 0:
            v = v_c + (v - v_c) * decay
        elif kind == 1:
            v = v_start + (v_c - v_start) * (j + 1) / nsub
        else:
            # RK4 on v'' = w^2 (v_c - v) - 2 zeta w v'
            w2 = p1 * p1
            c2 = 2.0 * p2 * p1
            k1v = acc
            k1a = w2 * (v_c - v) - c2 * acc
            k2v = acc + 0.5 * h * k1a
            k2a = w2 * (v_c - (v + 0.5 * h * k1v)) - c2 * k2v
            k3v = acc + 0.5 * h * k2a
            k3a = w2 * (v_c - (v + 0.5 * h * k2v)) - c2 * k3v
            k4v = acc + h * k3a
            k4a = w2 * (v_c - (v + h * k3v)) - c2 * k4v
            v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            acc = acc + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    if kind != 2:
        acc = (v - v_start) / dt
    return x, y, th, thd, v, acc


def plant_step(state: VehicleState, v_c: float, theta_ddot: float, model: ActuatorModel,
               dt: float, dt_sub: float | None = None, accel: float = 0.0,
               return_accel: bool = False):
    """Advance the simulated vehicle by one control period.

    The pose follows the discrete motion model at ``dt_sub`` resolution while
    the body velocity follows ``model`` under the zero-order-held command.
    ``accel`` is the body acceleration carried between calls by the
    second-order plant (ignored otherwise).
    """
    if dt_sub is None:
        dt_sub = dt / 10.0
    if not (dt > 0 and dt_sub > 0):
        raise InvalidParameterError("dt and dt_sub must be positive")
    if dt_sub > dt * (1 + 1e-12):
        raise InvalidParameterError("dt_sub must not exceed dt")
    nsub = int(round(dt / dt_sub))
    if abs(nsub * dt_sub - dt) > 1e-9 * dt:
        raise InvalidParameterError("dt_sub must divide dt")
    _check_finite(state.as_array(), v_c, theta_ddot)
    if isinstance(model, FirstOrder):
        kind, p1, p2 = _FIRST, model.tau, 0.0
    elif isinstance(model, LinearRamp):
        kind, p1, p2 = _RAMP, 0.0, 0.0
    elif isinstance(model, SecondOrder):
        kind, p1, p2 = _SECOND, model.omega_n, model.zeta
    else:
        raise InvalidParameterError(f"unknown actuator model {model!r}")
    x, y, th, thd, v, acc = _plant_kernel(state.x, state.y, state.theta, state.theta_dot, state.v,
                                          float(accel), float(v_c), float(theta_ddot),
                                          kind, float(p1), float(p2), float(dt), nsub)
    out = VehicleState(float(x), float(y), wrap_angle(float(th)), float(thd), float(v))
    return (out, float(acc)) if return_accel else out


class Plant:
    """Stateful wrapper holding the plant's internal acceleration between steps."""

    def __init__(self, model: ActuatorModel, substeps: int = 10):
        self.model = model
        self.substeps = substeps
        self.accel = 0.0

    def step(self, state: VehicleState, v_c: float, theta_ddot: float, dt: float) -> VehicleState:
        out, self.accel = plant_step(state, v_c, theta_ddot, self.model, dt, dt / self.substeps,
                                     accel=self.accel, return_accel=True)
        return out


# --- identification ----------------------------------------------------------

def fit_tau(step_responses, eps: float = 1e-6) -> float:
    """Least-squares time constant from step-response samples.

    Each sample is ``(t, v, v0, v_c)``: the body velocity ``v`` observed ``t``
    seconds after a step command from ``v0`` to ``v_c``.  Fits the slope of
    ``log((v_c - v) / (v_c - v0)) = -t / tau`` through the origin.  Samples
    whose log argument falls outside (0, 1] (overshoot, noise at steady state)
    are dropped.
    """
    arr = np.asarray(step_responses, dtype=float).reshape(-1, 4)
    t, v, v0, vc = arr.T
    span = vc - v0
    ok = np.abs(span) > eps
    ratio = np.full(t.shape, np.nan)
    ratio[ok] = (vc[ok] - v[ok]) / span[ok]
    ok &= (ratio > 0) & (ratio <= 1) & (t > 0) & np.isfinite(ratio)
    if ok.sum() < 2:
        raise IdentificationError(f"need at least 2 valid samples, got {int(ok.sum())}")
    tt, yy = t[ok], np.log(ratio[ok])
    slope = -float(tt @ yy) / float(tt @ tt)
    if not slope > 0:
        raise IdentificationError(f"fitted decay rate {slope:.3g} is not positive")
    return 1.0 / slope


def step_response(model: ActuatorModel, v0: float, v_c: float, duration: float, dt: float = 0.01):
    """Body velocity trace of ``model`` for a step command; returns ``(t, v)``."""
    n = int(round(duration / dt))
    t = np.arange(n + 1) * dt
    v = np.empty(n + 1)
    state = VehicleState(v=v0)
    plant = Plant(model, substeps=1)
    v[0] = v0
    for k in range(n):
        state = plant.step(state, v_c, 0.0, dt)
        v[k + 1] = state.v
    return t, v
