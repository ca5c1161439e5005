"""
Optimizer Module
AdamW with decoupled weight decay.
"""
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .tensor import Tensor


@dataclass
class OptimizerState:
    """Per-parameter Adam moments plus step count and schedule values."""

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lr": self.lr, "weight_decay": self.weight_decay, "step": self.step}


def adamw_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    lr: float = None,
) -> OptimizerState:
    """
    Apply one AdamW update in place on ``params`` data.

        p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)

    Args:
        params: Named parameters
        grads: Gradients keyed like ``params``; missing names count as zero
        state: Optimizer state, updated and returned
        lr: Overrides ``state.lr`` for this step when given

    Returns:
        The updated state
    """
    lr = state.lr if lr is None else lr
    if lr < 0 or state.weight_decay < 0:
        raise InvalidArgumentError("learning rate and weight decay must be non-negative")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step

    for name in sorted(params):
        p = params[name]
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise ShapeError(f"gradient for '{name}' has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v

        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.data = (p.data * (1.0 - lr * state.weight_decay) - lr * update).astype(p.dtype, copy=False)
    return state


class AdamW:
    """
    Thin stateful wrapper used by the trainer.
    """

    def __init__(self, params: Mapping[str, Tensor], lr: float, weight_decay: float = 0.0):
        self.params = params
        self.state = OptimizerState(lr=lr, weight_decay=weight_decay)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = float(value)

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        adamw_step(self.params, grads, self.state)
