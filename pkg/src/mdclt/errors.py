"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from :class:`MdcltError`.
The ``exit_code`` attribute is what the command line returns for it.
"""


class MdcltError(Exception):
    exit_code = 1


class ConfigError(MdcltError, ValueError):
    """Invalid configuration or invalid user-supplied parameter."""

    exit_code = 2


class ParameterError(ConfigError):
    pass


class ShapeError(ConfigError):
    pass


class RangeError(ConfigError, IndexError):
    pass


class CapacityError(ConfigError):
    pass


class IncompleteAuditError(ConfigError):
    def __init__(self, message, gaps=()):
        super().__init__(message)
        self.gaps = tuple(gaps)


class NumericError(MdcltError, ArithmeticError):
    """Numerical failure: degenerate covariance, non-finite samples, etc."""

    exit_code = 3


class DegeneracyError(NumericError):
    pass


class UndefinedPointError(NumericError):
    """Point lies on (or too close to) a kink of a piecewise-linear function."""


class InsufficientDataError(NumericError):
    pass
