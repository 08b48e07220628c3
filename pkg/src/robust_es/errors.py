"""Exception hierarchy.

Validation problems derive from :class:`DomainError` (a ``ValueError``);
numerical breakdowns derive from :class:`NumericalError`. The CLI maps the
first family to exit status 1 and the second to exit status 2.
"""


class DomainError(ValueError):
    """An input lies outside the domain of the operation."""


class InfeasibleError(DomainError):
    """The requested target cannot be reached (e.g. power not above alpha)."""


class InsufficientSampleError(DomainError):
    """Too few observations for the number of estimated parameters."""


class DegenerateDesignError(DomainError):
    """The design cannot identify the model (e.g. an empty group)."""


class InfiniteEffectError(DomainError):
    """The effect size is unbounded (R^2 equal to one)."""


class ConfigError(DomainError):
    """Invalid simulation configuration."""


class NumericalError(ArithmeticError):
    """Base class for numerical failures."""


class SingularDesignError(NumericalError):
    """Design matrix is rank deficient."""


class CovarianceSingularError(NumericalError):
    """Bread or sandwich covariance cannot be inverted."""


class SeparationError(NumericalError):
    """Logistic fit diverged, usually because of (quasi-)separation."""
