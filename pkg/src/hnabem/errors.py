"""Exception types shared across the solver."""


class HnaBemError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HnaBemError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GeometryError(HnaBemError, ValueError):
    """Invalid or unsupported geometry (non-simple polygon, bad circle, ...)."""


class ClassificationError(HnaBemError, ValueError):
    """An operation was applied to a side of the wrong kind."""


class ConfigurationError(HnaBemError, ValueError):
    """Inconsistent solver / space / operator configuration."""


class SingularityError(HnaBemError, ValueError):
    """Evaluation requested at a singular point (e.g. coincident source/target)."""


class SolverError(HnaBemError, RuntimeError):
    """Linear solve failed or did not reach the required residual.

    Carries the estimated condition number when available.
    """

    def __init__(self, message: str, cond_estimate: float | None = None):
        super().__init__(message)
        self.cond_estimate = cond_estimate


class CostGuardError(HnaBemError, RuntimeError):
    """A run was refused because it exceeds the configured cost guard."""
