"""Exception types shared across the package.

The CLI maps each class to its own exit status.
"""


class ClsClustError(ValueError):
    pass


class ConfigError(ClsClustError):
    """Invalid hyperparameters or option combinations."""


class DataError(ClsClustError):
    """Malformed, non-finite or mismatched input data."""


class InfeasibleError(ClsClustError):
    """The problem cannot be solved with the given sizes (e.g. too few rows per cluster)."""
