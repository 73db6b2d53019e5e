"""Exception hierarchy.

Input/validation problems derive from ``ValidationError`` (also a
``ValueError``); failures of a numerical procedure on valid input derive from
``NumericalError``.  The CLI maps the two families to exit codes 2 and 3.
"""


class GfbmError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(GfbmError, ValueError):
    pass


class NumericalError(GfbmError, ArithmeticError):
    pass


class InvalidParameters(ValidationError):
    pass


class NonIntegrableEndpoint(ValidationError):
    pass


class NonIntegrableTail(ValidationError):
    pass


class NormalizerUndefined(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class BandOutOfTable(ValidationError):
    pass


class GridTooCoarse(ValidationError):
    pass


class TargetOutsideBall(ValidationError):
    pass


class InsufficientTailSamples(ValidationError):
    pass


class ToleranceNotMet(NumericalError):
    """Adaptive quadrature ran out of subdivisions.

    The best available estimate and its error bound are attached so callers
    can decide whether to use it anyway.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ExtrapolationUnstable(NumericalError):
    pass


class NotFactorizable(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


class NonPositiveValues(NumericalError):
    pass
