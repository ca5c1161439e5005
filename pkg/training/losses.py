"""
Losses Module
Multi-task behaviour-cloning loss over waypoints, steering and throttle.
"""
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence

import numpy as np

from core import ops
from core.errors import InvalidArgumentError
from core.tensor import Tensor
from model.network import ForwardPass

TASKS = ("waypoints", "steering", "throttle")


@dataclass
class TaskLosses:
    """Per-task L1 terms (graph nodes) and their weighted sum."""

    waypoints: Tensor
    steering: Tensor
    throttle: Tensor
    total: Tensor

    def values(self) -> Dict[str, float]:
        return {
            "wp": self.waypoints.item(),
            "st": self.steering.item(),
            "th": self.throttle.item(),
            "total": self.total.item(),
        }

    def tasks(self) -> Sequence[Tensor]:
        return (self.waypoints, self.steering, self.throttle)


def mtl_loss(output: ForwardPass, targets: Mapping[str, np.ndarray], alpha: Sequence[float] = (1.0, 1.0, 1.0)) -> TaskLosses:
    """
    alpha0 * mean|wp error| (six components) + alpha1 * |st error| + alpha2 * |th error|,
    each term averaged over the batch.

    Args:
        output: Batched forward pass
        targets: "waypoints" N×6, "steering" N, "throttle" N
        alpha: Loss weights
    """
    if len(alpha) != 3:
        raise InvalidArgumentError(f"expected three loss weights, got {len(alpha)}")
    n = output.waypoints.shape[0]
    l_wp = ops.l1_loss(output.waypoints, np.asarray(targets["waypoints"]).reshape(n, -1))
    l_st = ops.l1_loss(output.steering, np.asarray(targets["steering"]).reshape(n, 1))
    l_th = ops.l1_loss(output.throttle, np.asarray(targets["throttle"]).reshape(n, 1))
    total = ops.add(
        ops.add(ops.scale(l_wp, float(alpha[0])), ops.scale(l_st, float(alpha[1]))),
        ops.scale(l_th, float(alpha[2])),
    )
    return TaskLosses(l_wp, l_st, l_th, total)


def task_errors(prediction: Mapping[str, np.ndarray], targets: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Per-sample absolute errors: mean over the six waypoint components, plain for the controls."""
    wp = np.asarray(prediction["waypoints"], dtype=np.float64)
    n = wp.shape[0]
    return {
        "wp": np.abs(wp - np.asarray(targets["waypoints"], dtype=np.float64).reshape(n, -1)).mean(axis=1),
        "st": np.abs(np.asarray(prediction["steering"], dtype=np.float64).reshape(n) - np.asarray(targets["steering"]).reshape(n)),
        "th": np.abs(np.asarray(prediction["throttle"], dtype=np.float64).reshape(n) - np.asarray(targets["throttle"]).reshape(n)),
    }
