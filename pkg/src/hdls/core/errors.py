from typing import Optional

import numpy as np


class HdlsError(Exception):
    """Base class for every error raised by hdls."""


class DataError(HdlsError, ValueError):
    """The input data or configuration cannot be used as given."""


class DimensionMismatch(DataError):
    """Array shapes do not agree, e.g. len(y) != rows of x."""


class AllColumnsConstant(DataError):
    """Every column of the design is constant."""


class InvalidDimensions(DataError):
    """A size parameter is out of range for the data shape."""


class ZeroSignal(DataError):
    pass


class SupportTooLarge(DataError):
    """A refit was asked for at least as many columns as rows."""


class MissingResponse(DataError):
    """The response column is not in the table."""


class ParseError(DataError):
    """
    The input table could not be parsed.

    Parameters
    ----------
    message:
        Description of the problem.
    row:
        Zero-based data row of the problem, if known.
    column:
        Column name or index of the problem, if known.
    """

    def __init__(
        self,
        message: str,
        row: Optional[int] = None,
        column: Optional[object] = None,
    ):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NonNumericCell(ParseError):
    pass


class NumericalError(HdlsError, np.linalg.LinAlgError):
    """A numerical kernel could not produce a result."""


class SingularSystem(NumericalError):
    """
    A symmetric system that should be positive definite is (numerically)
    singular.

    Parameters
    ----------
    message:
        Description of the failing system.
    smallest_pivot:
        Smallest Cholesky pivot seen before the failure, if available.
    stage:
        Pipeline stage the failure happened in, if any.
    """

    def __init__(
        self,
        message: str,
        smallest_pivot: Optional[float] = None,
        stage: Optional[str] = None,
    ):
        self.base_message = message
        self.smallest_pivot = smallest_pivot
        self.stage = stage
        super().__init__(self._format())

    def _format(self) -> str:
        text = self.base_message
        if self.smallest_pivot is not None:
            text += f" (smallest pivot {self.smallest_pivot:.3e})"
        if self.stage is not None:
            text = f"{self.stage}: {text}"
        return text

    def with_stage(self, stage: str) -> "SingularSystem":
        """Returns a copy of the error annotated with a pipeline stage."""
        return SingularSystem(self.base_message, self.smallest_pivot, stage)
