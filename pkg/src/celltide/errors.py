"""Exception types shared by all celltide modules."""


class CelltideError(ValueError):
    """Base class for every error raised on invalid input or state."""


class ParseError(CelltideError):
    """A raw traffic log row could not be parsed.

    The offending (1-based) line number is kept in ``lineno``.
    """

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class NoPeriodicContentError(CelltideError):
    """Raised when a spectrum carries no usable periodic component."""

    def __init__(self, message="no periodic content"):
        super().__init__(message)
