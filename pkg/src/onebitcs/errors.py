"""Exception hierarchy shared by every module in the package."""


class OneBitCSError(Exception):
    """Base class; the CLI maps subclasses to a one-line error prefix."""

    kind = "error"


class InvalidParameterError(OneBitCSError, ValueError):
    kind = "invalid-parameter"


class ShapeError(OneBitCSError, ValueError):
    kind = "shape"


class DomainError(OneBitCSError, ValueError):
    kind = "domain"


class DegenerateError(OneBitCSError, ArithmeticError):
    """A normalisation hit a zero vector.

    ``last_estimate`` holds the most recent valid unit-norm iterate when one
    exists (``None`` for initialisation / metric failures).
    """

    kind = "degenerate"

    def __init__(self, message, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate


class IncompleteSweepError(OneBitCSError, LookupError):
    kind = "incomplete-sweep"


class ConfigError(OneBitCSError, ValueError):
    kind = "config"
