"""Exception types shared across the package."""


class AmpError(Exception):
    """Base class for all package errors."""


class ParameterError(AmpError, ValueError):
    """An argument is outside its admissible range."""


class ShapeError(AmpError, ValueError):
    """Array dimensions are inconsistent."""


class DomainError(AmpError, ValueError):
    """A quantity is requested outside the regime where it is defined."""


class ScaleError(AmpError, ValueError):
    """A combinatorial enumeration would exceed the supported size."""


class NumericError(AmpError, ArithmeticError):
    """A numerical routine failed (bracketing, quadrature, PSD drift).

    ``partial`` optionally carries results computed before the failure.
    """

    def __init__(self, message="", partial=None):
        self.partial = partial if partial is not None else []
        super().__init__(message)


class DivergenceError(AmpError, ArithmeticError):
    """An iterate became non-finite.

    ``t`` is the iteration at which the non-finite value appeared and
    ``partial`` holds whatever the caller had collected before that.
    """

    def __init__(self, t, message=None, partial=None):
        self.t = t
        self.partial = partial if partial is not None else []
        super().__init__(message or f"non-finite iterate at t={t}")
