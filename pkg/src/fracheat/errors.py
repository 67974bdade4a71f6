"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FracHeatError(Exception):
    """Base class for every domain error raised by :mod:`fracheat`."""


class PoleError(FracHeatError, ValueError):
    """Gamma function evaluated at (or within tolerance of) a pole."""


class ConvergenceError(FracHeatError, ArithmeticError):
    """An iterative evaluation did not reach its tolerance within budget."""


class OrderRangeError(FracHeatError, ValueError):
    """A fractional order lies outside the interval an operator supports."""


class InsufficientGridError(FracHeatError, ValueError):
    pass


class SingularKernelError(FracHeatError, ValueError):
    pass


class DomainError(FracHeatError, ValueError):
    """Arguments outside the set on which a formula is real-valued or valid."""


class ClosureError(FracHeatError, ValueError):
    """Result of a symbolic operation is not a finite sum of power terms."""


class DependentBasisError(FracHeatError, ValueError):
    pass


class NotInvariantError(FracHeatError, ValueError):
    pass


class ConstantUndefinedError(FracHeatError, ValueError):
    """A closed-form constant hits a Gamma pole or is not real."""


class NonlinearSolveError(FracHeatError, ArithmeticError):
    pass


class BlowUpError(FracHeatError, ArithmeticError):
    pass


class CFLError(FracHeatError, ValueError):
    pass


class ConfigError(FracHeatError, ValueError):
    pass


class NegativityWarning(UserWarning):
    """Negative values were clipped before forming ``T**gamma``."""
