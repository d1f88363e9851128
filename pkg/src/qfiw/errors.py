"""Exception types shared across the package.

The CLI maps :class:`ValidationError` to exit code 2 and
:class:`NumericalError` to exit code 3.
"""


class ValidationError(ValueError):
    """Invalid input: bad parameters, malformed files, violated preconditions."""


class DomainError(ValidationError):
    """Argument outside the domain where a formula is defined."""


class NumericalError(RuntimeError):
    """A numerical routine failed (non-convergence, sign anomaly, ...)."""
