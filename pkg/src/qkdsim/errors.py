"""Exception types shared across the package.

The CLI maps these onto distinct process exit codes, so library code
should raise the most specific type that applies.
"""

from __future__ import annotations


class QkdSimError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(QkdSimError, ValueError):
    """A parameter or state failed a precondition (bad range, not a
    density matrix, non-physical efficiency, ...)."""


class ConfigError(QkdSimError, ValueError):
    """A run configuration could not be parsed or validated."""


class CapabilityError(QkdSimError):
    """A request exceeded a supported model capability (e.g. a pair
    multiplicity above the supported truncation order)."""


class NumericError(QkdSimError, ArithmeticError):
    """A numeric routine failed to converge or produced an invalid
    intermediate (quadrature failure, undefined ratio, ...)."""


class FitError(NumericError):
    """Source-parameter fit did not reach the requested tolerance.

    Carries the best parameters found so callers can still inspect or
    accept the result.
    """

    def __init__(self, message: str, best_params=None, best_distance: float | None = None):
        super().__init__(message)
        self.best_params = best_params
        self.best_distance = best_distance
