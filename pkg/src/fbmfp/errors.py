"""Exception hierarchy shared by every module of the package."""


class FbmFpError(Exception):
    """Base class for all errors raised by fbmfp."""


class DomainError(FbmFpError, ValueError):
    """An argument lies outside the supported parameter regime."""


class UnsupportedRegimeError(DomainError):
    """Parameters are valid mathematically but outside what is implemented (e.g. b < 0)."""


class SingularityError(FbmFpError, ArithmeticError):
    """A denominator vanished (the Laplace point sits on a singularity)."""


class DivergenceError(FbmFpError, ArithmeticError):
    """A transform was evaluated outside its abscissa of convergence."""


class QuadratureError(FbmFpError, ArithmeticError):
    """Adaptive quadrature could not reach the requested tolerance.

    Attributes
    ----------
    achieved : float
        Error estimate reached before the subdivision budget ran out.
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved


class NonIntegrableKernelError(FbmFpError, ArithmeticError):
    """The flux kernel singularity exponent is >= 1 where the data is not negligible."""


class IllConditionedError(FbmFpError, ArithmeticError):
    """The discretised first-kind Volterra system is numerically singular."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InversionError(FbmFpError, ArithmeticError):
    """Every requested inverse-Laplace method failed."""


class InstabilityError(FbmFpError, ArithmeticError):
    """The finite-difference integrator detected a loss of stability."""
