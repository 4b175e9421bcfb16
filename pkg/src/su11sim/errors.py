"""Exception types raised across the package."""


class Su11Error(Exception):
    """Base class for all package errors."""


class DimensionError(Su11Error, ValueError):
    pass


class DomainError(Su11Error, ValueError):
    """Wavevector arguments outside the propagating (non-evanescent) region."""


class ConfigError(Su11Error, ValueError):
    pass


class DivergenceError(Su11Error, ArithmeticError):
    pass


class UndefinedError(Su11Error, ValueError):
    """A derived quantity (Schmidt number, SNL, L_x, ...) is undefined for the input."""


class InsufficientSamplingError(Su11Error, ValueError):
    pass


class FitError(Su11Error, RuntimeError):
    pass


class ExtrapolationError(Su11Error, ValueError):
    pass
