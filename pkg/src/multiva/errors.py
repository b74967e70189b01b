"""Exception types shared across the toolkit."""

from __future__ import annotations


class MultivaError(Exception):
    """Base class for all toolkit errors."""


class IngestionError(MultivaError):
    """Raised when an input file is malformed or violates a data invariant.

    Carries the offending line number when the error is tied to a
    specific line of a source stream.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InputError(MultivaError):
    """Raised when operation arguments violate a precondition."""


class ConsistencyError(MultivaError):
    """Raised when separately-produced inputs do not index the same space.

    Typically signals that a bit store was simulated with different
    adversaries, prefix groups, or vantage points than the caller assumes.
    """


class ResolutionError(MultivaError):
    """Raised when a DNS surface resolution cannot complete.

    ``partial`` holds whatever surface was accumulated before the failure,
    when available.
    """

    def __init__(self, message: str, partial=None):
        self.partial = partial
        super().__init__(message)


class OracleError(MultivaError):
    """Raised when the reference fixed-point routing oracle fails to settle.

    Indicates a semantics bug in preferences or export rules; not expected
    for valid Gao-Rexford inputs.
    """
