from typing import Any


class FlaBenchError(Exception):
    """Base error for the package.

    Optionally carries structured context (shapes, axes, offsets) for reports.
    """

    def __init__(self, message: str, context: dict[str, Any] | None = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}


class DimensionError(FlaBenchError):
    """Raised when operand shapes do not fit an operation."""


class NonFiniteError(FlaBenchError):
    """Raised when a primitive produces NaN or Inf."""


class BackwardError(FlaBenchError):
    """Raised when a tape cannot be differentiated."""


class FormatError(FlaBenchError):
    """Raised on malformed FLT1 files or checkpoint manifests."""

    def __init__(
        self,
        message: str,
        offset: int | None = None,
        context: dict[str, Any] | None = None,
    ):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message, context)
        self.offset = offset


class OracleRefusalError(FlaBenchError):
    """Raised when the loop oracle is asked to evaluate an oversize input."""


class ConfigurationError(FlaBenchError):
    """Raised when block parameters are inconsistent."""


class DivergenceError(FlaBenchError):
    """Raised when toy training exceeds the divergence threshold."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class UsageError(FlaBenchError):
    """Raised on invalid command-line usage."""
