from .am import angular_layer, plan, velocity_layer
from .common import GuessTrajectory, PlannerResult, initial_traj, shift_guess
from .config import PlannerConfig
from .joint import JointResult, plan_joint

__all__ = ["angular_layer", "velocity_layer", "plan", "plan_joint", "GuessTrajectory", "PlannerResult",
           "JointResult", "PlannerConfig", "initial_traj", "shift_guess"]
