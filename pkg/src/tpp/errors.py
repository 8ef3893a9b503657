"""Exception hierarchy. Every error raised on purpose derives from TppError."""


class TppError(Exception):
    """Base class for all package errors."""


class FormatError(TppError):
    """A dataset or model file is malformed."""


class TooFewShots(TppError):
    pass


class DegenerateData(TppError):
    pass


class SingularMoments(TppError):
    pass


class SingularQ(TppError):
    pass


class NotPSD(TppError):
    pass


class DimensionMismatch(TppError, ValueError):
    pass


class LengthMismatch(TppError, ValueError):
    pass


class UnknownClass(TppError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownRecipe(TppError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DivideByZero(TppError, ZeroDivisionError):
    pass


class ConfigError(TppError, ValueError):
    """Invalid or unknown keys in a JSON configuration."""
