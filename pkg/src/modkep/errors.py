"""Exception and warning types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class ConvergenceError(RuntimeError):
    """An adaptive sum failed to meet its tolerance within the safety cap."""


class ApproximationWarning(UserWarning):
    """A semiclassical validity condition is marginal (result still returned)."""
