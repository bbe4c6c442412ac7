# src/errors.py
"""
Error hierarchy shared by every module.

Each error carries the process exit code the CLI returns when it escapes a
pipeline, so `src.cli` only needs one `except ZeroStateError` clause.
"""

from typing import Optional


class ZeroStateError(Exception):
    exit_code = 1


# -----------------------
# Preconditions / inputs
# -----------------------
class InvalidRange(ZeroStateError, ValueError):
    """A numeric precondition failed (ranges, thresholds, NaN samples)."""


class GridMismatch(ZeroStateError):
    """Operands live on different grids, or the grid kind is unsupported."""


class UnknownPotentialKind(ZeroStateError, ValueError):
    exit_code = 2


class CoincidentPoints(ZeroStateError, ValueError):
    pass


class ExponentMismatch(ZeroStateError, ValueError):
    pass


# -----------------------
# Numerical outcomes
# -----------------------
class DivergentNorm(ZeroStateError):
    """The quasinorm does not converge on the sampled data."""

    def __init__(self, message: str, index=None, end: Optional[str] = None):
        super().__init__(message)
        self.index = index
        self.end = end


class NumericOverflow(ZeroStateError):
    pass


class InsufficientTail(ZeroStateError):
    pass


class DegenerateFit(ZeroStateError):
    pass


# -----------------------
# Pipeline failures (distinct exit codes)
# -----------------------
class ConfigError(ZeroStateError):
    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}, column {column}")
        text = f"{message} ({'; '.join(where)})" if where else message
        super().__init__(text)
        self.field = field
        self.line = line
        self.column = column


class BudgetExhausted(ZeroStateError):
    exit_code = 3


class ContractionViolated(ZeroStateError):
    exit_code = 4


class NoZeroState(ZeroStateError):
    exit_code = 5


class InconsistentClassification(ZeroStateError):
    exit_code = 6


class InequalityViolated(ZeroStateError):
    exit_code = 7
