"""Exception types raised across the package.

Every error derives from :class:`TimbreError` so the command line can map
them to a nonzero exit status in one place. File-system failures are left
as the builtin ``OSError``.
"""


class TimbreError(Exception):
    """Base class for all package errors."""


class ParseError(TimbreError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownLabel(TimbreError, ValueError):
    pass


class WrongOctave(TimbreError, ValueError):
    pass


class UnsupportedFormat(TimbreError, ValueError):
    pass


class EmptyInput(TimbreError, ValueError):
    pass


class NonPositive(TimbreError, ValueError):
    pass


class InsufficientBandwidth(TimbreError, ValueError):
    pass


class NoOnsetFound(TimbreError):
    pass


class ClipTooShort(TimbreError, ValueError):
    pass


class ClassTooSmall(TimbreError, ValueError):
    pass


class EmptyBatch(TimbreError, ValueError):
    pass


class EmptySet(TimbreError, ValueError):
    pass


class ShapeMismatch(TimbreError, ValueError):
    pass


class DataSourceError(TimbreError):
    pass


class AllClipsSkipped(TimbreError):
    pass
