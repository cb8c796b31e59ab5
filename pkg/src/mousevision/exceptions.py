"""Exception taxonomy, mapped one-to-one onto CLI exit codes."""


class MouseVisionError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(MouseVisionError):
    """Caller passed invalid arguments or flags (exit code 1)."""

    exit_code = 1


class DataError(MouseVisionError):
    """Input data or file format is invalid (exit code 2)."""

    exit_code = 2


class ShapeError(DataError):
    """Array shapes are inconsistent with the requested operation."""


class NumericError(MouseVisionError):
    """Numeric failure: non-finite values or a failed gradient check (exit code 3)."""

    exit_code = 3
