"""Exception hierarchy shared by every module."""


class OpenASEPError(Exception):
    """Base class for all package errors."""


class ParameterError(OpenASEPError, ValueError):
    """Inputs violate a documented precondition (admissibility, windows, ranges)."""


class PoleError(ParameterError):
    """A Gamma function or q-Pochhammer denominator was evaluated at a pole."""


class DegenerateParameterError(ParameterError):
    """A normalising q-Pochhammer factor vanishes, so the measure is undefined."""


class SupportError(ParameterError):
    """A point was requested outside the support of a measure."""


class NumericalError(OpenASEPError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    The partial result, when one exists, is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
