"""
Error hierarchy shared by every package.
Library code raises these; only the CLI and evaluation loops catch them.
"""


class DrivingStackError(Exception):
    """Base class for all errors raised by this project."""


class InvalidArgumentError(DrivingStackError, ValueError):
    """An argument is outside its documented domain."""


class DegenerateLatitudeError(InvalidArgumentError):
    """Longitude scale collapses near the poles."""


class ShapeError(DrivingStackError, ValueError):
    """Tensor or grid shapes are inconsistent."""


class NonFiniteError(DrivingStackError, FloatingPointError):
    """A tensor op produced NaN or inf while debug checks are on."""


class LogFormatError(DrivingStackError):
    """Episode log is truncated or has a bad header."""


class GridFormatError(DrivingStackError):
    """Grid dump is truncated or has a bad header."""


class CheckpointFormatError(DrivingStackError):
    """Parameter checkpoint is truncated, has a bad header or mismatched parameters."""


class SceneFormatError(DrivingStackError):
    """Scene JSON violates the scene schema."""


class TrainingDivergedError(DrivingStackError):
    """Loss became NaN or inf during training."""


class ConfigError(DrivingStackError):
    """Configuration file missing, unreadable or invalid."""
