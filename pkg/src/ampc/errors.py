class InvalidInputError(ValueError):
    """Non-finite or malformed numeric input."""


class InvalidParameterError(ValueError):
    """A model parameter outside its admissible range."""


class IdentificationError(RuntimeError):
    """Time-constant regression could not produce an estimate."""


class ScenarioError(ValueError):
    """Scenario geometry or definition is inconsistent."""


class InvalidProblemError(ValueError):
    """QP data with inconsistent dimensions."""


class CondenseError(ValueError):
    """State map handed to the condenser is not affine."""


class PlannerFailure(RuntimeError):
    """A planner subproblem could not be solved."""


class ConfigError(ValueError):
    """Bad scenario or configuration file."""
