"""Exception taxonomy shared across the package.

The CLI maps these to exit codes: config problems -> 2, data/format
problems -> 3, numerical failures -> 4.
"""


class KdfmError(Exception):
    """Base class for all package errors."""


class ConfigError(KdfmError):
    """Invalid configuration value or combination."""


class ShapeError(ConfigError):
    """Array shapes disagree with what the operation requires."""


class UnsupportedTargetError(ConfigError):
    """A loss was handed a target kind it does not accept."""


class DataError(KdfmError):
    """Dataset construction, splitting, or sampling failed."""


class DataFormatError(DataError):
    """A dataset file is malformed; message carries the byte offset."""


class NumericalError(KdfmError):
    """Non-finite values appeared during training; message names the step."""


class UninitializedEmaError(KdfmError):
    """EMA parameters were requested before any update was applied."""
