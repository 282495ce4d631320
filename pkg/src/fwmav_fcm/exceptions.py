"""Exception hierarchy shared by all modules."""


class FwmavError(Exception):
    """Base class for package errors."""


class ConfigError(FwmavError, ValueError):
    """Invalid configuration or parameter value."""


class DimensionError(FwmavError, ValueError):
    """Array shapes do not agree."""


class NumericalError(FwmavError, ArithmeticError):
    """Numerical failure: degenerate clustering, non-finite values."""


class DegenerateClusterError(NumericalError):
    """A cluster ended up with zero total membership mass."""


class SimulationFault(NumericalError):
    """The simulated state became non-finite."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class RankDeficientWarning(UserWarning):
    """Consequent regression was rank deficient and relied on ridge damping."""
