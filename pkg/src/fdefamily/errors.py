from __future__ import annotations


class FdeFamilyError(Exception):
    """Base class for all errors raised by :mod:`fdefamily`."""


class DomainError(FdeFamilyError, ValueError):
    """An argument lies outside the domain of the operation."""


class InfeasibleExponentError(DomainError):
    """An exponent is not strictly inside ``(1/(2-beta), 2/(3-beta))``."""


class RangeError(DomainError):
    """An intermediate value left the domain of the nonlinearity."""


class SingularIntegrandError(DomainError):
    """The nonlinearity vanishes where ``1/g`` has to be integrated."""


class ConfigurationError(FdeFamilyError, ValueError):
    """Invalid construction parameters or configuration input."""


class NumericalFailureError(FdeFamilyError, ArithmeticError):
    """Iterates became non-finite."""
