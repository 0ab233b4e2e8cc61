"""Exception hierarchy.

Every failure raised by the library derives from :class:`PrivDesignError`, so
callers can catch one type at the boundary. The CLI maps the families below to
stable exit codes.
"""


class PrivDesignError(Exception):
    """Base class for all library errors."""


class ValidationError(PrivDesignError, ValueError):
    """Input data does not describe a valid instance."""


class NotNormalized(ValidationError):
    pass


class NegativeMass(ValidationError):
    pass


class NotStochastic(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidBudget(ValidationError):
    """Budgets are unsorted, negative, or too few letters."""


class ZeroMarginal(ValidationError):
    pass


class MixtureMismatch(ValidationError):
    pass


class ZeroSupport(ValidationError):
    pass


class SupportViolation(ValidationError):
    pass


class ZeroReference(ValidationError):
    pass


class BudgetExceeded(PrivDesignError):
    pass


class NumericalError(PrivDesignError, ArithmeticError):
    pass


class NoConvergence(NumericalError):
    pass


class Singular(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class MaxIterations(NumericalError):
    """The simplex iteration cap was reached; never reported as optimal."""


class EpsilonTooLarge(PrivDesignError):
    """A constructed conditional left the probability simplex."""


class LeakageViolated(PrivDesignError):
    pass


class ResidualCheckFailed(PrivDesignError):
    pass


class NoFeasibleAssignment(PrivDesignError):
    pass


class NoFeasibleFilter(PrivDesignError):
    pass


class OracleSizeExceeded(PrivDesignError):
    pass


class DegenerateBudgetWarning(UserWarning):
    """The second budget is zero; only the constant mechanism is feasible."""
