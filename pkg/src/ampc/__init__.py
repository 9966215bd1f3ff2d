"""Model-predictive trajectory planning with first-order actuator dynamics.

The planner alternates between an angular-acceleration QP and a commanded
velocity QP (:func:`ampc.planner.plan`); :func:`ampc.planner.plan_joint` is
the single-QP baseline.  :mod:`ampc.sim` closes the loop against a plant and
:mod:`ampc.scenarios` holds the benchmark scenes.
"""
from ._accel import backend
from .dynamics import (ConstantTau, ControlSequence, FirstOrder, LinearRamp, PiecewiseLinearTau, SecondOrder,
                       VehicleState, fit_tau, propagate_state, velocity_chain)
from .planner import PlannerConfig, plan, plan_joint

__version__ = "0.1.0"

__all__ = ["backend", "ConstantTau", "ControlSequence", "FirstOrder", "LinearRamp", "PiecewiseLinearTau",
           "SecondOrder", "VehicleState", "fit_tau", "propagate_state", "velocity_chain", "PlannerConfig",
           "plan", "plan_joint", "__version__"]
