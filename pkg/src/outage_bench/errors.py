"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """A scenario or profile violates a structural invariant."""


class CapabilityError(RuntimeError):
    """A requested exact method exceeds its supported problem size."""


class QuadratureConvergenceError(RuntimeError):
    """Adaptive quadrature exhausted its depth budget.

    Carries the best available estimate and its error bound so callers can
    decide whether the partial result is still usable.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
