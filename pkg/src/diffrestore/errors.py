"""Exception hierarchy shared across the package.

Each class carries the CLI exit code it maps to.
"""


class DiffRestoreError(Exception):
    exit_code = 1


class ConfigError(DiffRestoreError):
    exit_code = 2


class ParameterError(ConfigError, ValueError):
    """Invalid argument value (schedule range, timestep, kernel support...)."""


class DataError(DiffRestoreError):
    exit_code = 3


class ShapeError(DataError, ValueError):
    pass


class InputError(DataError, ValueError):
    pass


class IntegrityError(DataError):
    """Stored artifact does not match its recorded content hash."""


class NumericError(DiffRestoreError, ArithmeticError):
    exit_code = 4


class TrainingError(NumericError):
    pass
