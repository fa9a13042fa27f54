"""Exception hierarchy shared by all modules."""


class StrathomError(Exception):
    """Base class for every error raised by the package."""


class DomainError(StrathomError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(StrathomError, ValueError):
    """Invalid experiment, profile or law configuration."""


class HypothesisError(StrathomError, ValueError):
    """A structural hypothesis of the limit theory is violated.

    Raised for singular ``T`` blocks, common atoms of the two limit measures,
    zero ν-densities under the bulk tensor and unbounded layer rules.
    """


class SolverError(StrathomError, RuntimeError):
    """Iterative solver stopped before reaching the requested tolerance."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)
