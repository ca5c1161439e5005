"""
Layers Module
Parameter initialization and the building blocks of the network.
"""
from collections import OrderedDict
from typing import Dict, List, Sequence

import numpy as np

from config import StageSpec
from core import ops
from core.tensor import Tensor, parameter


class ParameterBank:
    """
    Ordered store of named parameters, filled with seeded uniform fan-in init.
    """

    def __init__(self, seed: int, dtype):
        self.rng = np.random.default_rng(seed)
        self.dtype = dtype
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()

    def _uniform(self, shape, fan_in: int) -> np.ndarray:
        bound = np.sqrt(6.0 / fan_in) if fan_in else 0.0
        return self.rng.uniform(-bound, bound, size=shape)

    def add(self, name: str, shape: Sequence[int], fan_in: int, zero: bool = False) -> Tensor:
        data = np.zeros(shape) if zero else self._uniform(shape, fan_in)
        tensor = parameter(data.astype(self.dtype), name=name, dtype=self.dtype)
        self.params[name] = tensor
        return tensor

    def conv(self, prefix: str, c_out: int, c_in: int, k: int) -> None:
        self.add(f"{prefix}.weight", (c_out, c_in, k, k), c_in * k * k)
        self.add(f"{prefix}.bias", (c_out,), 0, zero=True)

    def dense(self, prefix: str, n_out: int, n_in: int) -> None:
        self.add(f"{prefix}.weight", (n_out, n_in), n_in)
        # bias drawn from the same bound so heads start off-centre
        self.add(f"{prefix}.bias", (n_out,), n_in)

    def gru(self, prefix: str, n_in: int, hidden: int) -> None:
        bound = 1.0 / np.sqrt(hidden)
        for name, shape in (("w_ih", (3 * hidden, n_in)), ("w_hh", (3 * hidden, hidden)),
                            ("b_ih", (3 * hidden,)), ("b_hh", (3 * hidden,))):
            data = self.rng.uniform(-bound, bound, size=shape).astype(self.dtype)
            self.params[f"{prefix}.{name}"] = parameter(data, name=f"{prefix}.{name}", dtype=self.dtype)


def build_encoder(bank: ParameterBank, prefix: str, stages: List[StageSpec], in_channels: int) -> None:
    c_in = in_channels
    for s, stage in enumerate(stages):
        per_branch = stage.out_channels // len(stage.dilations)
        for b, _ in enumerate(stage.dilations):
            bank.conv(f"{prefix}.stage{s}.conv{b}", per_branch, c_in, stage.kernel)
        c_in = stage.out_channels


def encoder_output_shape(stages: List[StageSpec], height: int, width: int):
    """(C, H, W) after all stages; convs keep the spatial size, pools shrink it."""
    h, w = height, width
    for stage in stages:
        ph, pw = stage.pool
        h = (h - ph) // ph + 1
        w = (w - pw) // pw + 1
    return stages[-1].out_channels, h, w


def run_encoder(params: Dict[str, Tensor], prefix: str, stages: List[StageSpec], x: Tensor, standardize: bool) -> Tensor:
    for s, stage in enumerate(stages):
        branches = []
        for b, dilation in enumerate(stage.dilations):
            p = f"{prefix}.stage{s}.conv{b}"
            pad = dilation * (stage.kernel - 1) // 2
            branches.append(ops.conv2d(x, params[f"{p}.weight"], params[f"{p}.bias"], dilation=dilation, padding=pad))
        x = branches[0] if len(branches) == 1 else ops.concat(branches, axis=-3)
        if standardize:
            x = ops.standardize(x)
        x = ops.relu(x)
        x = ops.pool2d(x, stage.pool_kind, stage.pool)
    return x


def run_mlp(params: Dict[str, Tensor], prefix: str, depth: int, x: Tensor) -> Tensor:
    for k in range(depth):
        x = ops.relu(ops.dense(x, params[f"{prefix}.fc{k}.weight"], params[f"{prefix}.fc{k}.bias"]))
    return ops.dense(x, params[f"{prefix}.out.weight"], params[f"{prefix}.out.bias"])
