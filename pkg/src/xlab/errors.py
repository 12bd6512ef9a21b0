"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DegenerateFlagError(ValidationError):
    """Cartan gaps too small for the attracting flag to be well defined."""


class ChartMissError(ValueError):
    """Point lies outside (or too close to the edge of) a coordinate chart."""


class NearSingularStratumError(ValueError):
    """Generalized Cartan factor h is not unique to working precision."""


class ConvergenceError(RuntimeError):
    """Iterative solver did not converge; ``best`` holds the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NotProvablyDiscreteError(ValueError):
    """Ping-pong certificate could not be verified."""


class BudgetExhausted(RuntimeError):
    """A sampling or search budget ran out before completion."""
