"""Exception types shared across the package."""


class FullSpecError(Exception):
    """Base class for every error raised by fullspec."""


class ParseError(FullSpecError, ValueError):
    """Malformed input document; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(FullSpecError, ValueError):
    """Input outside the domain of an operation."""


class DimensionError(DomainError):
    """Array shapes do not line up."""


class PreconditionError(FullSpecError):
    """A mathematical precondition of a construction does not hold."""


class NeedsSpectrumError(PreconditionError):
    """The requested computation needs an eigendecomposition, not just L."""


class NumericError(FullSpecError, ArithmeticError):
    """A numerical routine failed (non-convergence, singular system)."""


class GuardError(FullSpecError):
    """A size guard refused to materialize a large dense object."""
