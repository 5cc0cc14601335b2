"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class RVHierError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(RVHierError):
    """Invalid configuration: unknown keys, bad values, bad combinations."""


class DataError(RVHierError, ValueError):
    """Invalid input data: wrong shapes, bad prices, misaligned series."""


class NumericalError(RVHierError, ArithmeticError):
    """Numerical failure: singular systems, undefined statistics."""
