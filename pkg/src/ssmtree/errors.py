"""Exception types shared across the package."""


class SupportError(ValueError):
    """A point lies outside the declared support of a measure or family."""


class ConfigurationError(ValueError):
    """A measure/quadruplet/run configuration is invalid or numerically untenable."""


class OrderingError(ValueError):
    """A coupling operation received arguments violating the required ordering."""


class IntegrationDomainError(RuntimeError):
    """An ODE trajectory left the declared domain. Carries the exit state."""

    def __init__(self, message, state=None, time=None):
        super().__init__(message)
        self.state = state
        self.time = time


class TruncationError(RuntimeError):
    """A trace was too short for the requested horizon and extension was disabled."""
