"""Exception and warning types raised across the package."""


class StressDiffError(Exception):
    """Base class for all package errors."""


class NonZeroMean(StressDiffError, ValueError):
    """Inverse Laplacian requested for a field whose mean is not zero."""


class NonPositiveB(StressDiffError, ValueError):
    """Elastic strain b reached zero or became negative."""


class NegativeDensity(StressDiffError, ValueError):
    """Density is negative where a pressure law was evaluated."""


class DegenerateDensity(StressDiffError, ValueError):
    """Density below the vacuum floor when recovering velocity from momentum."""


class StepFailure(StressDiffError, RuntimeError):
    """Time step rejected after the maximum number of halvings."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NaNDetected(StressDiffError, FloatingPointError):
    """Non-finite values appeared in the solution."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class WindowTooShort(StressDiffError, ValueError):
    """A diagnostic needs more snapshots than it was given."""


class ConfigError(StressDiffError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """Config text is not valid TOML."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(ConfigError, ValueError):
    """One or more invariants of the configuration are violated.

    ``violations`` lists every problem found, not only the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PositivityWarning(UserWarning):
    """Density came close to vacuum inside a diagnostic that takes log(rho)."""
