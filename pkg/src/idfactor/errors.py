"""Exception hierarchy shared across the package.

All errors raised on bad input or failed guarantees derive from
:class:`IdFactorError` so callers can catch package failures in one place
while still distinguishing the failure mode.
"""


class IdFactorError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(IdFactorError, ValueError):
    """Operands have incompatible or invalid dimensions."""


class FormatError(IdFactorError, ValueError):
    """A text artifact (matrix, path, plan, certificate) is malformed.

    Carries the offending line number when one is known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConvergenceError(IdFactorError, RuntimeError):
    """An iterative routine exhausted its budget or its hypothesis failed."""


class HypothesisError(IdFactorError, ValueError):
    """Input violates a hypothesis of the guarantee being invoked.

    The message names the specific failed inequality.
    """


class InfeasibleError(IdFactorError, ValueError):
    """A counting precondition rules out the requested selection."""


class ExhaustionError(IdFactorError, RuntimeError):
    """Greedy selection ran out of admissible indices.

    Only possible when preconditions were violated or deliberately relaxed;
    reported rather than silently recovered.
    """


class StallError(IdFactorError, RuntimeError):
    """Cover or window construction could not certify a usable extent."""

    def __init__(self, message, at=None, pair=None):
        super().__init__(message)
        self.at = at
        self.pair = pair


class VerificationError(IdFactorError, RuntimeError):
    """An internal consistency check that should be impossible failed."""
