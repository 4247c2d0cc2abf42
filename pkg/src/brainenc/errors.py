"""Exception hierarchy shared across the engine.

The CLI maps these onto process exit codes: ConfigurationError -> 1,
DataError -> 2, NumericalError -> 3.
"""


class BrainencError(Exception):
    """Base class for engine errors."""


class ConfigurationError(BrainencError):
    """Invalid configuration: bad parameter values, missing stages, bad flags."""


class DataError(BrainencError):
    """Malformed or inconsistent input data."""


class NumericalError(BrainencError):
    """Numerical failure (singular system, NaN predictions, excess resample failures)."""
