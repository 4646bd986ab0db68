"""Exception hierarchy.

``UsageError`` subclasses map to CLI exit code 1, ``DataError`` subclasses
to exit code 2.
"""


class RankcalError(Exception):
    pass


class UsageError(RankcalError, ValueError):
    pass


class DataError(RankcalError, ValueError):
    pass


class InvalidParameterError(UsageError):
    pass


class InvalidInputError(DataError):
    pass


class EmptyHistogramError(DataError):
    pass


class InsufficientPointsError(InvalidInputError):
    pass


class NotPositiveDefiniteError(DataError):
    pass


class InsufficientHistoryError(DataError):
    """Raised when a day has fewer preceding days than the training window."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
