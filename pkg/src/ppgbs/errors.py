"""Exception types shared across the package.

ConfigurationError maps to CLI exit code 2, NumericalError (and subclasses)
to exit code 3.
"""


class ConfigurationError(ValueError):
    """Invalid configuration, file format, or incompatible dimensions."""


class NumericalError(ArithmeticError):
    """Numerical failure (singularities, range errors, cutoff exhaustion)."""


class SingularCovarianceError(NumericalError):
    """Covariance rank-deficient beyond regularization."""

    def __init__(self, message, modes=None):
        super().__init__(message)
        self.modes = list(modes) if modes is not None else []


class NumericalRangeError(NumericalError):
    """Quantity left the representable / valid numerical range."""


class CutoffError(NumericalError):
    """Truncation cutoff insufficient for the requested tolerance."""
