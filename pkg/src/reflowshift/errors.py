"""Exception hierarchy for the toolkit.

Every class carries a distinct process exit code so CLI failures are
machine-checkable: the CLI prints one ``error code=<n> class=<Name>: <msg>``
line on stderr and exits with that code.
"""

from __future__ import annotations


class ReflowShiftError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ParseError(ReflowShiftError):
    """A CSV or JSON input could not be parsed; message carries row/column context."""

    exit_code = 10


class SchemaMismatch(ReflowShiftError):
    """Model file and feature data disagree on schema version or columns."""

    exit_code = 11


class WrongModelFamily(ReflowShiftError):
    """A command received a model file of an unsupported family."""

    exit_code = 12


class EmptyDataset(ReflowShiftError):
    """A cleaning step removed every row."""

    exit_code = 13


class NoFeaturesLeft(ReflowShiftError):
    """The correlation filter dropped every feature."""

    exit_code = 14


class TooFewRows(ReflowShiftError):
    """Not enough rows for the requested fold count."""

    exit_code = 15


class LengthMismatch(ReflowShiftError):
    """Paired sequences have different lengths."""

    exit_code = 16


class ShapeMismatch(ReflowShiftError):
    """Array dimensions do not match the model."""

    exit_code = 17


class DivisorTooSmall(ReflowShiftError):
    """A pad-ratio aggregation hit a near-zero denominator (degenerate deposit)."""

    exit_code = 18


class InvalidRecord(ReflowShiftError):
    """An assembly record cannot be featurized."""

    exit_code = 19


class NotConverged(ReflowShiftError):
    """Optimizer hit its iteration budget before meeting the tolerance.

    Carries the best iterate so callers can inspect how close it got.
    """

    exit_code = 20

    def __init__(self, message: str, model=None, gap: float | None = None):
        super().__init__(message)
        self.model = model
        self.gap = gap


class Diverged(ReflowShiftError):
    """Training loss became non-finite."""

    exit_code = 21


class ConstantActual(ReflowShiftError):
    """R-squared is undefined for a constant actual vector."""

    exit_code = 22


IO_ERROR_EXIT_CODE = 23
