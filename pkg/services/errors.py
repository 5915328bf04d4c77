"""Typed errors raised by the numerical services."""
from typing import Optional


class QcrbError(Exception):
    """Base class for every error raised by this package.

    ``time_index`` is filled in by the compute pipeline when the failure
    happened at a specific point of the time grid.
    """

    time_index: Optional[int] = None


class InvalidMatrix(QcrbError, ValueError):
    pass


class DimensionMismatch(QcrbError, ValueError):
    pass


class NotHermitian(QcrbError, ValueError):
    pass


class NotPositiveSemidefinite(QcrbError, ValueError):
    pass


class TraceDeviationTooLarge(QcrbError, ValueError):
    pass


class InvalidDimension(QcrbError, ValueError):
    pass


class InvalidOrder(QcrbError, ValueError):
    pass


class ImaginaryResidueError(QcrbError, ArithmeticError):
    pass


class ZeroFisherInformation(QcrbError, ArithmeticError):
    pass


class DegenerateGram(QcrbError, ArithmeticError):
    def __init__(self, order: int, message: str = ""):
        self.order = order
        super().__init__(message or f"Gram determinant of order {order} is degenerate")


class MissingMomentError(QcrbError, LookupError):
    pass


class SchemaError(QcrbError, ValueError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


# Errors a CLI run reports as bad input rather than a numerical abort.
INPUT_ERRORS = (
    SchemaError,
    InvalidMatrix,
    DimensionMismatch,
    NotHermitian,
    NotPositiveSemidefinite,
    TraceDeviationTooLarge,
    InvalidDimension,
    InvalidOrder,
)
