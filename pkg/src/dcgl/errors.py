"""Exception types shared across the toolkit.

The CLI maps these onto exit codes (config -> 2, data -> 3, numerics -> 4).
"""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(ValueError):
    """Malformed input data, file, or container."""


class NumericalError(RuntimeError):
    """Non-finite values or a numerically unsolvable system."""
