"""
MGN Module
Adaptive loss weights that equalize the per-task gradient norms measured on the
last shared layer, so every task learns at the same pace.
"""
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from core.errors import InvalidArgumentError

NORM_FLOOR = 1e-8
WEIGHT_SUM = 3.0


@dataclass(frozen=True)
class MgnState:
    power: float = 0.5
    smoothing: float = 0.9
    smoothed: Optional[np.ndarray] = field(default=None, repr=False)
    steps: int = 0


def normalize_weights(alpha: Sequence[float], total: float = WEIGHT_SUM) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64)
    return a * (total / a.sum())


def mgn_update(state: MgnState, norms: Sequence[float], alpha: Sequence[float]) -> Tuple[MgnState, np.ndarray]:
    """
    One weight update.

    Args:
        state: Smoothing state
        norms: Gradient norm of each weighted task loss (alpha_k * L_k) on the shared parameters
        alpha: Current loss weights

    Returns:
        (new state, new weights summing to 3)
    """
    g = np.asarray(norms, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    if g.shape != a.shape:
        raise InvalidArgumentError(f"{g.size} norms for {a.size} weights")
    if not np.all(np.isfinite(g)):
        raise InvalidArgumentError(f"task gradient norms must be finite, got {g}")
    if np.any(a <= 0):
        raise InvalidArgumentError(f"loss weights must be positive, got {a}")
    g = np.maximum(g, NORM_FLOOR)

    s = state.smoothing
    smoothed = g if state.smoothed is None else s * state.smoothed + (1.0 - s) * g
    updated = a * (smoothed.mean() / smoothed) ** state.power
    return replace(state, smoothed=smoothed, steps=state.steps + 1), normalize_weights(updated)


def shared_gradient_norms(task_grads: Sequence[Mapping[str, np.ndarray]], shared: Sequence[str], alpha: Sequence[float]) -> np.ndarray:
    """Norm of alpha_k * grad L_k restricted to the ``shared`` parameter names."""
    norms = []
    for a, grads in zip(alpha, task_grads):
        sq = sum(float(np.sum(np.square(grads[name], dtype=np.float64))) for name in shared)
        norms.append(float(a) * np.sqrt(sq))
    return np.array(norms)
