"""Exception hierarchy shared across the package."""


class ExhirdError(Exception):
    """Base class for all package errors."""


class ConfigError(ExhirdError):
    """Invalid configuration value or combination (CLI exit code 2)."""


class DataError(ExhirdError):
    """Missing, malformed, or misaligned data (CLI exit code 3)."""


class EmptyDocumentError(DataError):
    """A document produced no tokens after preprocessing."""


class ShapeError(ExhirdError):
    """Tensor operands have incompatible shapes."""


class NumericError(ExhirdError):
    """NaN/Inf values, attention underflow, or training divergence (CLI exit code 4)."""
