# Core numerical modules: tensors, differentiable ops, optimizer, checkpoints
from .errors import DrivingStackError
from .tensor import Tensor, Tape, backward, constant, parameter, set_debug_checks, set_default_dtype
from .optim import AdamW, OptimizerState, adamw_step
from .checkpoint import load_parameters, save_parameters

__all__ = [
    "DrivingStackError",
    "Tensor",
    "Tape",
    "backward",
    "constant",
    "parameter",
    "set_debug_checks",
    "set_default_dtype",
    "AdamW",
    "OptimizerState",
    "adamw_step",
    "load_parameters",
    "save_parameters",
]
