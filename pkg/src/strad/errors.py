"""Exception types shared across the package."""


class StradError(Exception):
    """Base class for all package-specific errors."""


class DataError(StradError):
    """Malformed input data."""


class MissingColumnError(DataError):
    """A named CSV column is absent from the header."""


class NonNumericCellError(DataError):
    """A value cell could not be parsed as a decimal float."""


class NonBinaryLabelError(DataError):
    """A label cell is not the integer 0 or 1."""


class NonFiniteValueError(DataError):
    """A value is NaN or infinite."""


class ShapeMismatchError(StradError):
    """Array shapes of two operands disagree."""


class ConfigError(StradError):
    """Invalid or unknown configuration content."""


class NumericError(StradError):
    """A loss, gradient, or parameter became non-finite during training."""


class CheckpointError(StradError):
    """A checkpoint file is malformed or incompatible with the configuration."""
