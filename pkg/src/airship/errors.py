class AirshipError(Exception):
    """Base class for all package errors."""


class FormatError(AirshipError, ValueError):
    """A file does not follow its binary or text layout."""


class ParameterError(AirshipError, ValueError):
    """An argument violates an operation's preconditions."""


class ChecksumMismatchError(AirshipError):
    """An index or ground-truth file was built from different data."""
