"""Exception hierarchy shared by every odflow library."""

from pathlib import Path
from typing import Optional, Union


class ODFlowError(Exception):
    """Base class for all expected (data/validation) failures."""

    exit_code = 1


class DomainError(ODFlowError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class UndefinedMetricError(DomainError):
    """A metric has a zero denominator (constant reference, all-zero flows)."""


class ShapeError(ODFlowError, ValueError):
    """Array or tensor shapes are incompatible."""


class ValidationError(ODFlowError, ValueError):
    """Inputs are individually readable but inconsistent with each other."""


class UsageError(ODFlowError):
    """An API was called in a way it does not support."""

    exit_code = 2


class TrainingError(ODFlowError):
    """Training diverged (non-finite loss)."""


class FetchError(ODFlowError):
    """Tile download could not be configured or performed."""


class FormatError(ODFlowError):
    """A file or record could not be parsed.

    The message always carries the file path and, for line-oriented formats,
    the 1-based line number.
    """

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path if line is None else f"{self.path}:{line}"
            location += ": "
        super().__init__(f"{location}{message}")
