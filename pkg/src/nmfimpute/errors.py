"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class ConfigError(ValueError):
    """A solver or experiment setting is out of range."""


class NumericFailure(ArithmeticError):
    """The objective became non-finite during iteration."""


class MaskError(ValueError):
    """A mask is unusable, e.g. it marks every attribute as missing."""


class DataError(ValueError):
    """Input data could not be parsed or is structurally invalid."""
