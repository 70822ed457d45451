"""Exception types raised by cbnorm."""


class CbNormError(ValueError):
    """Base class for all validation errors in this package."""


class NonHermitian(CbNormError):
    pass


class NotPSD(CbNormError):
    pass


class BadExponent(CbNormError):
    pass


class DimMismatch(CbNormError):
    pass


class NotCP(CbNormError):
    pass


class NotTP(CbNormError):
    pass


class BadPOVM(CbNormError):
    pass


class NotEBT(CbNormError):
    pass


class BadName(CbNormError):
    pass


class NoSignChange(CbNormError):
    pass


class UnnormalizedStateWarning(UserWarning):
    """Emitted when an entropy is requested for a matrix whose trace is not 1."""
