"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration key or value."""


class ResourceLimitError(RuntimeError):
    """A construction exceeded its configured resource budget."""


class NumericOverflowError(ArithmeticError):
    """A trajectory produced a non-finite state."""
