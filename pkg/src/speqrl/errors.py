"""Error taxonomy shared across the library."""


class ConfigurationError(ValueError):
    """Bad shapes, unknown names, out-of-range settings."""


class NumericError(FloatingPointError):
    """Non-finite values where finite ones are required."""


class StateError(RuntimeError):
    """Operation invalid for the current object state (e.g. sampling an empty buffer)."""
