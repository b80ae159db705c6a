"""
Exception hierarchy for directional trend fitting.

Input problems derive from ValueError, numerical failures from RuntimeError,
so callers that only know the builtin types still catch them.
"""

from typing import Optional


class TrendError(Exception):
    """Base class for all dirtrend errors."""


class TrendInputError(TrendError, ValueError):
    """Invalid input data, arguments or configuration."""


class DomainError(TrendInputError):
    """Argument outside the domain of a function (e.g. atan2 at the origin)."""


class DimensionMismatchError(TrendInputError):
    """Matrix shapes do not agree."""


class InvalidProjectionError(TrendInputError):
    """Eigenprojections are not symmetric, idempotent and mutually orthogonal."""


class PenaltyError(TrendInputError):
    """Penalty matrix is not symmetric positive semi-definite."""


class TrendRangeError(TrendInputError):
    """Trend function left its documented range."""


class CsvParseError(TrendInputError):
    """Malformed CSV input; carries the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(TrendError, RuntimeError):
    """Numerical failure during fitting."""


class DegenerateRowError(NumericalError):
    """A row is too close to zero to be rescaled onto the sphere."""

    def __init__(self, row: int, norm: float, epsilon: float):
        self.row = row
        self.norm = norm
        self.epsilon = epsilon
        super().__init__(
            f"row {row} has norm {norm:.3e} below {epsilon:.1e}; "
            "cannot rescale it to a direction"
        )


class ConvergenceError(NumericalError):
    """Iterative method hit its iteration cap."""
