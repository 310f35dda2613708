"""Exception types shared across the toolkit."""


class CrbleaError(Exception):
    """Base class for all toolkit errors."""


class ContractViolationError(CrbleaError):
    """An internal calling contract was broken (dimension mismatch, missing field)."""


class ConfigurationError(CrbleaError):
    """Invalid user-facing configuration (unknown problem, bad knob value)."""


class EvaluationError(CrbleaError):
    """A problem evaluator produced a non-finite value.

    Carries the offending inputs so the failing point can be reproduced.
    """

    def __init__(self, message, x_u=None, x_l=None):
        super().__init__(message)
        self.x_u = x_u
        self.x_l = x_l


class TrainingDivergenceError(CrbleaError):
    """Network training produced a non-finite loss."""
