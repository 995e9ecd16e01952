"""Exception hierarchy shared by every module."""


class FeneError(Exception):
    """Base class for all errors raised by the package."""


class ConfigError(FeneError, ValueError):
    """Invalid parameter, grid size or run configuration."""


class DomainError(FeneError, ValueError):
    """Point outside the open unit disk."""


class ShapeError(FeneError, ValueError):
    """Array shape does not match the grid."""


class NumericalFailure(FeneError, ArithmeticError):
    """Base class for failures detected while integrating."""


class StepSizeError(NumericalFailure):
    """Time step violates a stability (CFL) bound."""


class SchemeViolationError(NumericalFailure):
    """A step produced a state that breaks a discrete invariant."""


class ConvergenceError(NumericalFailure):
    """Iteration did not reach the requested tolerance."""


class NumericalDomainError(NumericalFailure):
    """NaN or infinite value encountered in an integrand."""


class BDStepError(NumericalFailure):
    """Boundary rejection budget exhausted for a Brownian path."""

    def __init__(self, path_index, message=None):
        self.path_index = int(path_index)
        super().__init__(message or f"rejection budget exhausted for path {self.path_index}")


class FormatError(FeneError, ValueError):
    """Malformed checkpoint or configuration file."""
