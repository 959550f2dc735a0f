"""
Exception hierarchy for fcreg.

Each class carries the exit code the command-line surface returns for it.
"""


class FcregError(Exception):
    """Base class for every error raised by fcreg"""

    exit_code = 1


class ConfigError(FcregError):
    """Invalid or inconsistent configuration"""

    exit_code = 2


class DataError(FcregError, ValueError):
    """Input data that cannot be used as given"""

    exit_code = 3


class GridMismatchError(DataError):
    """Two functions or operators live on incompatible grids"""


class NumericalError(FcregError, ArithmeticError):
    """A numerical precondition failed (rank, eigenvalue floor, singular pencil)"""

    exit_code = 4
