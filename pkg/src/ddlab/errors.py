"""Exception hierarchy shared by every ddlab module."""


class DdlabError(Exception):
    """Base class for all library errors."""


class DomainError(DdlabError, ValueError):
    """Argument outside the mathematical domain of a function."""


class SingularError(DdlabError, ArithmeticError):
    """A denominator or matrix is numerically singular."""


class UnsupportedArgumentError(DdlabError, ValueError):
    """Argument combination the implemented formulas do not cover."""


class NonFiniteRateError(DdlabError, ArithmeticError):
    """A local drawdown rate evaluated to NaN or infinity."""


class InstabilityError(DdlabError, ArithmeticError):
    """Backward marching left the admissible range [0, 1]."""


class NonConvergenceError(DdlabError, ArithmeticError):
    """Fixed-point iteration hit its iteration cap."""


class QuadratureError(DdlabError, ArithmeticError):
    """Adaptive quadrature failed to meet its tolerance."""


class PreconditionError(DdlabError, ValueError):
    """Input violates a documented precondition of the operation."""


class ValidationError(DdlabError, ValueError):
    """Model or query failed validation; carries the failed constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.constraint}: {v.message}" for v in self.violations)
        super().__init__(msg or "validation failed")
