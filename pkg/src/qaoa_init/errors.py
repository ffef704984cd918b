"""Shared exception types."""


class ResourceLimitError(RuntimeError):
    """Requested problem size exceeds what the statevector engine supports."""


class NumericError(RuntimeError):
    """A computation produced non-finite values."""


class ConfigError(ValueError):
    """Invalid experiment or training configuration."""
