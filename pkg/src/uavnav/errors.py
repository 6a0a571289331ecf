"""Exception types raised by the estimation library."""


class NearSingularityError(ValueError):
    """A logarithm or inversion was requested too close to a singular point."""


class SingularInnovationError(ArithmeticError):
    """The innovation covariance of a measurement update is not invertible."""


class DegenerateRegressorError(ValueError):
    """A least-squares regressor matrix is rank deficient."""


class InvalidModelError(ValueError):
    """A model cannot be inverted with the given coefficients."""


class StaleMeasurementError(ValueError):
    """A measurement is older than the filter's current time."""


class LogFormatError(ValueError):
    """A sensor or truth log does not follow the CSV schema."""
