"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` -> 2,
``HypothesisError`` -> 3, ``NumericalError`` -> 4.
"""


class BacklashError(Exception):
    """Base class for all package errors."""


class ConfigError(BacklashError, ValueError):
    """Malformed scenario description. ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class DomainError(BacklashError, ValueError):
    """Argument outside the domain of an operation."""


class HypothesisError(BacklashError):
    """A theorem precondition does not hold (non-Hurwitz F, lambda range, singular Phi)."""


class NumericalError(BacklashError, ArithmeticError):
    """Iteration failed to converge or produced non-finite values."""


class IntegrityError(NumericalError):
    """A simulation invariant broke down, typically because the step is too large."""
