"""Shared exception types."""


class AoipmError(Exception):
    """Base class for all package errors."""


class DegenerateBinsError(AoipmError):
    """Raised when an attribute has too few distinct values to bin."""


class OutOfRangeError(AoipmError):
    """Raised in strict mode when a value falls outside every interval."""


class HierarchyParseError(AoipmError):
    """Raised on a malformed hierarchy config document."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class EmptyRelationError(AoipmError):
    """Raised when an operation would leave a relation with no attributes."""


class EmptyInputError(AoipmError):
    """Raised when an operation receives no data."""


class InsufficientBaselineError(AoipmError):
    """Raised when a series is shorter than the requested baseline window."""


class InsufficientDataError(AoipmError):
    """Raised when a series is too short to window."""


class TrainingDivergedError(AoipmError):
    """Raised when the forecaster loss becomes non-finite."""

    def __init__(self, epoch):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch


class DataLoadError(AoipmError):
    """Raised on malformed sensor data files."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class EmptyFeatureError(AoipmError):
    """Raised when preprocessing would drop every attribute."""


class AlignmentError(AoipmError):
    """Raised when a truth file does not align with the test units."""
