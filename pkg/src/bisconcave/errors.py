"""Exception hierarchy shared across the package."""


class BiconcaveError(Exception):
    """Base class for all package errors."""


class InvalidSampleError(BiconcaveError, ValueError):
    pass


class UndefinedInterpolationError(BiconcaveError, ValueError):
    pass


class DomainError(BiconcaveError, ValueError):
    pass


class ParameterError(BiconcaveError, ValueError):
    pass


class CalibrationError(BiconcaveError, ValueError):
    pass


class ConfigError(BiconcaveError, ValueError):
    pass


class InputError(BiconcaveError, ValueError):
    """Raised when ConcInt inputs violate their preconditions."""


class InsufficientSupportError(InputError):
    pass


class GridError(BiconcaveError, ValueError):
    pass


class UnsupportedModelError(BiconcaveError, TypeError):
    pass


class DivergentFunctionalError(BiconcaveError, ValueError):
    pass
