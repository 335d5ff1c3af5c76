"""Exception hierarchy shared by the solver, metastate and simulator layers."""


class MetastateError(Exception):
    """Base class for all package errors."""


class ValidationError(MetastateError, ValueError):
    """Input outside the domain of an operation."""


class NonDegeneracy1Violation(MetastateError):
    """A global minimizer has a reduced Hessian that is not positive definite."""

    def __init__(self, message, eigenvalue=None, minimizer=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.minimizer = minimizer


class NonDegeneracy2Violation(MetastateError):
    """Two distinct minimizers share (numerically) the same stability vector."""

    def __init__(self, message, pair=None, distance=None):
        super().__init__(message)
        self.pair = pair
        self.distance = distance


class TieFractionExceeded(NonDegeneracy2Violation):
    """Too many Gaussian samples fall on a tie between stability vectors."""


class SolverDidNotConverge(MetastateError):
    """No multi-start run reached the residual tolerance."""

    def __init__(self, message, failures=0):
        super().__init__(message)
        self.failures = failures


class BudgetExceeded(MetastateError):
    """Exact enumeration would exceed the configured size budget."""

    def __init__(self, message, size=None, budget=None):
        super().__init__(message)
        self.size = size
        self.budget = budget


class NoBracket(ValidationError):
    """The free-energy gap does not change sign on the scan interval."""
