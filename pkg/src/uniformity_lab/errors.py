"""Exception types shared across the library."""


class InvalidParameterError(ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedStatisticError(ValueError):
    """The requested statistic kind has no value for this operation."""


class EnumerationTooLargeError(ValueError):
    """An exact enumeration would exceed the composition-count cap."""


class DegenerateStatisticError(ValueError):
    """The statistic has zero mean gap, so normalized variance is undefined."""


class OutOfDomainError(ValueError):
    """A closed-form formula was evaluated outside its stated domain."""


class OutOfValidityError(ValueError):
    """A result lands outside the regime where the formula is valid."""


class DivergentMgfError(ArithmeticError):
    """A Poissonized moment generating function diverges at this parameter."""


class QuadratureFailureError(ArithmeticError):
    """Contour quadrature did not stabilize under node doubling."""
