"""Exception types raised across the package."""


class OptomechError(Exception):
    """Base class for all package errors."""


class ValidationError(OptomechError, ValueError):
    """Invalid user input; ``field`` names the offending parameter."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InstabilityError(OptomechError):
    """The linearized dynamics have no stable steady state."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class PhysicalityError(OptomechError):
    """A covariance matrix (or derived quantity) violates the uncertainty principle."""


class DegeneracyError(OptomechError):
    """A linear system that should be regular turned out singular."""


class ConvergenceError(OptomechError):
    """An iterative solver or quadrature did not reach its tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)
