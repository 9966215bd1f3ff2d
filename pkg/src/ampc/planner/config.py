from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import ConstantTau, LinearRamp, TauSchedule, tau_at
from ..errors import InvalidParameterError

PLANNER_MODELS = ("first-order", "linear")
ACCEL_MODES = ("command", "body")


@dataclass(frozen=True)
class PlannerConfig:
    """Bounds, weights and algorithm constants shared by the AM and joint planners.

    ``model`` selects the actuator response assumed inside the prediction:
    ``"first-order"`` uses ``tau_schedule``; ``"linear"`` is the linear ramp
    (the body reaches each command at the end of its step).

    ``accel_mode`` picks how the acceleration bounds are written:
    ``"command"`` bounds the change between consecutive commands,
    ``"body"`` bounds ``(v_c[i] - v[i-1]) / dt`` with ``v`` the predicted
    body velocity.
    """
    N: int = 50
    dt: float = 0.1
    v_max: float = 25.0
    a_min: float = -6.0
    a_max: float = 4.0
    theta_dot_min: float = -0.6
    theta_dot_max: float = 0.6
    theta_ddot_min: float = -1.0
    theta_ddot_max: float = 1.0
    kappa_max: float = 0.2
    epsilon: float = 1e-3
    w_theta0: float = 10.0
    w_v0: float = 10.0
    delta: float = 5.0
    w_max: float = 1e6
    theta_trust0: float = 0.3
    v_trust0: float = 1.0
    trust_min: float = 1e-4
    max_am_iters: int = 20
    model: str = "first-order"
    tau_schedule: TauSchedule = field(default_factory=lambda: ConstantTau(0.5))
    goal: tuple = (100.0, 0.0, 0.0)
    accel_mode: str = "command"
    ego_offsets: tuple = (-1.5, 0.0, 1.5)
    ego_radius: float = 1.0
    safety_margin: float = 0.3
    gate_near: float = 1.0
    gate_far: float = 10.0
    sensing_range: float = 70.0
    violation_tol: float = 1e-4
    w_goal_pos: float = 1.0
    w_goal_heading: float = 1.0
    w_smooth_theta: float = 1.0
    w_smooth_v: float = 1.0
    slack_reg: float = 1e-2

    def __post_init__(self):
        nums = [getattr(self, f) for f in ("dt", "v_max", "a_min", "a_max", "theta_dot_min", "theta_dot_max",
                                           "theta_ddot_min", "theta_ddot_max", "kappa_max", "epsilon",
                                           "delta", "theta_trust0", "v_trust0")]
        if not all(math.isfinite(x) for x in nums):
            raise InvalidParameterError("planner bounds must be finite")
        if self.N < 1:
            raise InvalidParameterError("horizon N must be >= 1")
        if not (self.a_min < 0 < self.a_max):
            raise InvalidParameterError("need a_min < 0 < a_max")
        if not (self.epsilon > 0 and self.delta > 1 and self.theta_trust0 > 0 and self.dt > 0):
            raise InvalidParameterError("need epsilon > 0, delta > 1, theta_trust0 > 0, dt > 0")
        if self.theta_dot_min > self.theta_dot_max or self.theta_ddot_min > self.theta_ddot_max:
            raise InvalidParameterError("empty heading-rate or heading-acceleration interval")
        if self.model not in PLANNER_MODELS:
            raise InvalidParameterError(f"model must be one of {PLANNER_MODELS}")
        if self.accel_mode not in ACCEL_MODES:
            raise InvalidParameterError(f"accel_mode must be one of {ACCEL_MODES}")
        if len(self.goal) != 3:
            raise InvalidParameterError("goal is (x_f, y_f, theta_f)")

    def decay(self, v_profile=None) -> np.ndarray:
        """Per-step decay factors of the prediction model at body velocities ``v_profile``."""
        if self.model == "linear":
            return np.zeros(self.N)
        if v_profile is None:
            v_profile = np.zeros(self.N)
        tau = np.broadcast_to(tau_at(self.tau_schedule, np.asarray(v_profile[:self.N], dtype=float)), (self.N,))
        return np.exp(-self.dt / tau)

    @property
    def prediction_model(self):
        return LinearRamp() if self.model == "linear" else self.tau_schedule
