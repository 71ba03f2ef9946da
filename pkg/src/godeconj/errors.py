"""Exception hierarchy shared by every module of the package."""


class GodeError(Exception):
    """Base class for all library errors."""


class DomainError(GodeError, ValueError):
    """An argument lies outside the window or violates a precondition."""


class NonFiniteError(DomainError):
    """An integrand or state sample evaluated to a non-finite number."""


class QuadratureError(GodeError, ArithmeticError):
    """Adaptive quadrature did not reach the tolerance within the depth cap."""


class SingularJumpError(DomainError):
    """A jump factor ``I + J`` is singular or its inverse exceeds the bound C."""


class DichotomyError(GodeError):
    """No hyperbolic splitting was found, or the dichotomy fit was too poor."""


class GateError(GodeError):
    """A contraction or hypothesis gate evaluated to a value >= 1."""

    def __init__(self, message, quantity=None):
        super().__init__(message)
        self.quantity = quantity


class ConvergenceError(GodeError):
    """A fixed-point iteration did not converge within ``max_iter`` sweeps."""

    def __init__(self, message, last_ratio=None, last_change=None):
        super().__init__(message)
        self.last_ratio = last_ratio
        self.last_change = last_change


class TruncationError(GodeError):
    """The tail truncation horizon does not fit inside the system window."""


class HullError(DomainError):
    """A query point lies outside the rectangular hull of a field grid."""


class ConfigError(GodeError, ValueError):
    """A scenario configuration is malformed or inconsistent."""
