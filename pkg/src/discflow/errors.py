"""Shared exception types."""


class ShapeError(ValueError):
    """Field shape does not match the grid it is used with."""


class DomainError(ValueError):
    """Argument outside its mathematical domain (|a| >= 1, f <= 0, ...)."""


class StateError(ValueError):
    """Flow state violates a structural requirement (rho outside (0, pi))."""


class SolvabilityError(RuntimeError):
    """Singular elliptic problem (pure Neumann with incompatible data)."""


class ConvergenceError(RuntimeError):
    """Iterative solver stagnated.  Carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PreconditionError(RuntimeError):
    """Operation called on a state that does not satisfy its precondition."""


class BlowUpError(RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class MonitorViolation(RuntimeError):
    """A runtime monitor left its admissible bracket."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ConfigError(ValueError):
    """Malformed run configuration."""
