"""Blind image restoration by diffusing an L2 estimate and sampling a pretrained reverse chain."""

from .errors import (ConfigError, DataError, DiffRestoreError, InputError, IntegrityError, NumericError,
                     ParameterError, ShapeError, TrainingError)
from .schedule import (NoiseSchedule, RespacedSchedule, default_schedule, diffuse, diffuse_step, kappa,
                       make_linear_schedule, respace)

__version__ = "0.1.0"
