"""Exception types shared across the package."""

__all__ = [
    "MorozovError",
    "DimensionMismatch",
    "ConvergenceFailure",
    "BracketFailure",
    "AssumptionViolation",
    "UnsupportedCheck",
    "RegimeError",
]


class MorozovError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MorozovError, ValueError):
    """A vector or matrix does not match the expected dimensions."""


class ConvergenceFailure(MorozovError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    Attributes
    ----------
    best : the best value found so far (solver dependent), or None.
    trace : iteration history when the failing loop keeps one, or None.
    """

    def __init__(self, message, best=None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = trace


class BracketFailure(ConvergenceFailure):
    """No sign change of the dual derivative was found below the lambda cap.

    Numerically this signals that the dual function increases all the way
    out, i.e. the noise estimate is too optimistic.
    """


class AssumptionViolation(MorozovError, ValueError):
    """The quadratic penalty is not positive definite on the problem.

    Raised when ker(L) and ker(A) intersect nontrivially, so the inner
    minimization problem has no unique solution.
    """


class UnsupportedCheck(MorozovError, TypeError):
    """A check needs a dense matrix but the operator is matrix-free.

    Materialize the operator (``LinearOperator.materialize``) and rebuild
    it as a dense operator to run the check.
    """


class RegimeError(MorozovError, RuntimeError):
    """The problem is outside the regime where a dual maximizer exists.

    Attributes
    ----------
    regime : str
        The diagnosed regime ("noise_dominates" or "too_optimistic").
    """

    def __init__(self, message, regime):
        super().__init__(message)
        self.regime = regime
