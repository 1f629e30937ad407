"""Exception types shared across the package.

Most validation failures are ValueError subclasses so that callers who do
not care about the finer taxonomy can catch the usual builtin. The CLI maps
these onto its exit codes (1 usage, 2 data, 3 numeric).
"""


class SoftknockError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SoftknockError, ValueError):
    """Inputs have incompatible or unexpected shapes."""


class UnsupportedDimensionError(DimensionError):
    """Requested dimension exceeds the precomputed prime table."""


class InvalidInputError(SoftknockError, ValueError):
    """Input values violate a precondition (range, finiteness, ...)."""


class InsufficientSamplesError(InvalidInputError):
    """Too few rows for the requested statistic."""


class DegeneratePlanError(SoftknockError, ValueError):
    """A transport plan has a zero row and cannot be projected."""


class SingularCovarianceError(SoftknockError, ValueError):
    """Covariance is not positive definite even after the ridge fix."""


class NumericError(SoftknockError, FloatingPointError):
    """A numeric stage produced non-finite values; the message names it."""


class DataError(SoftknockError, ValueError):
    """A file could not be read or its contents are malformed."""


class ConfigError(SoftknockError, ValueError):
    """A configuration document contains unknown or invalid entries."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at max_iters before reaching tolerance."""
