"""
Network Module
The LiDAR driving network: front-view and BEV encoders, fusion into a 192-wide
latent, a GRU waypoint decoder and command-specific control MLPs.
"""
import json
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import NUM_CLASSES, ModelConfig, load_model_config
from core import ops
from core.checkpoint import load_parameters, save_parameters
from core.errors import CheckpointFormatError, InvalidArgumentError, ShapeError
from core.tensor import Tensor, constant
from navigation.geo import LocalPoint
from perception.projection import ProjectedGrid
from .layers import ParameterBank, build_encoder, encoder_output_shape, run_encoder, run_mlp

GRU_INPUT_SIZE = 8
PARAMS_FILE = "model.dpw"
CONFIG_FILE = "model_config.json"


@dataclass
class ObservationInput:
    """One observation as the network consumes it."""

    front_grid: Optional[ProjectedGrid]
    bev_grid: Optional[ProjectedGrid]
    rp1: LocalPoint
    rp2: LocalPoint
    omega_l: float
    omega_r: float
    command: int


@dataclass
class ModelOutput:
    waypoints: List[LocalPoint]
    steering: float
    throttle: float


@dataclass
class ModelBatch:
    """
    Stacked inputs for N samples. ``front``/``bev`` are N×21×H×W (or None when
    the perspective is unused); ``route`` is [rp1.x, rp1.y, rp2.x, rp2.y].
    """

    front: Optional[np.ndarray]
    bev: Optional[np.ndarray]
    route: np.ndarray
    omega: np.ndarray
    command: np.ndarray
    targets: Optional[Dict[str, np.ndarray]] = None

    def __len__(self) -> int:
        return len(self.command)

    @classmethod
    def from_observations(cls, observations: Sequence[ObservationInput]) -> "ModelBatch":
        def stack(attr):
            grids = [getattr(o, attr) for o in observations]
            if any(g is None for g in grids):
                return None
            return np.stack([g.to_channels() for g in grids])

        return cls(
            front=stack("front_grid"),
            bev=stack("bev_grid"),
            route=np.array([[o.rp1.x, o.rp1.y, o.rp2.x, o.rp2.y] for o in observations], dtype=np.float64),
            omega=np.array([[o.omega_l, o.omega_r] for o in observations], dtype=np.float64),
            command=np.array([o.command for o in observations], dtype=np.int64),
        )


@dataclass
class ForwardPass:
    """Graph outputs of one batched forward pass."""

    latent: Tensor
    deltas: List[Tensor]
    waypoints: Tensor          # N×6, meters, [x1, y1, x2, y2, x3, y3]
    steering: Tensor           # N×1
    throttle: Tensor           # N×1


class DrivingNetwork:
    """
    Forward/backward-capable driving network over a named parameter set.
    """

    def __init__(self, config: ModelConfig = None, params: Dict[str, np.ndarray] = None):
        self.config = config or ModelConfig()
        self.dtype = np.float64 if self.config.dtype == "float64" else np.float32
        cfg = self.config
        if not cfg.uses_front and not cfg.uses_bev:
            raise InvalidArgumentError("at least one perspective must be enabled")

        if cfg.uses_front and cfg.uses_bev:
            front_shape = encoder_output_shape(cfg.front_stages, cfg.front_grid.height, cfg.front_grid.width)
            bev_shape = encoder_output_shape(cfg.bev_stages, cfg.bev_grid.height, cfg.bev_grid.width)
            if front_shape != bev_shape:
                raise ShapeError(f"encoder outputs differ: front {front_shape} vs bev {bev_shape}")

        bank = ParameterBank(cfg.init_seed, self.dtype)
        n_in = len(cfg.input_channels)
        if cfg.uses_front:
            build_encoder(bank, "front", cfg.front_stages, n_in)
        if cfg.uses_bev:
            build_encoder(bank, "bev", cfg.bev_stages, n_in)
        feat = (cfg.front_stages[-1].out_channels if cfg.uses_front else 0) + (
            cfg.bev_stages[-1].out_channels if cfg.uses_bev else 0
        )
        bank.add("fusion.pointwise.weight", (cfg.fusion_channels, feat), feat)
        bank.add("fusion.pointwise.bias", (cfg.fusion_channels,), 0, zero=True)
        bank.dense("fusion.dense", cfg.latent_size, cfg.fusion_channels)
        bank.gru("gru", GRU_INPUT_SIZE, cfg.latent_size)
        bank.dense("head.dx", 1, cfg.latent_size)
        bank.dense("head.dy", 1, cfg.latent_size)
        for c in range(cfg.num_commands):
            width = cfg.latent_size
            for k, hidden in enumerate(cfg.mlp_hidden):
                bank.dense(f"mlp{c}.fc{k}", hidden, width)
                width = hidden
            bank.dense(f"mlp{c}.out", 2, width)
        self.params: Dict[str, Tensor] = bank.params

        if params is not None:
            self.load_state(params)

    # ------------------------------------------------------------------
    # Parameters
    # ------------------------------------------------------------------

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state(self, params: Dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(params)
        extra = set(params) - set(self.params)
        if missing or extra:
            raise CheckpointFormatError(f"parameter mismatch: missing {sorted(missing)[:5]}, unexpected {sorted(extra)[:5]}")
        for name, tensor in self.params.items():
            value = np.asarray(params[name])
            if value.shape != tensor.shape:
                raise CheckpointFormatError(f"'{name}' has shape {value.shape}, expected {tensor.shape}")
            tensor.data = value.astype(self.dtype)

    def shared_parameters(self, prefix: str) -> Dict[str, Tensor]:
        """Parameters whose names start with ``prefix`` (e.g. the fusion dense layer)."""
        return {n: p for n, p in self.params.items() if n.startswith(prefix)}

    def save(self, directory: str) -> str:
        """Write the parameter file and its ModelConfig JSON into ``directory``."""
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, PARAMS_FILE)
        save_parameters(path, self.state_dict())
        with open(os.path.join(directory, CONFIG_FILE), "w", encoding="utf-8") as f:
            f.write(self.config.model_dump_json(indent=2))
        return path

    @classmethod
    def load(cls, path: str, dtype: str = None) -> "DrivingNetwork":
        """
        Load from a checkpoint directory or parameter file with its config beside it.
        """
        directory = path if os.path.isdir(path) else os.path.dirname(path)
        params_path = os.path.join(path, PARAMS_FILE) if os.path.isdir(path) else path
        config = load_model_config(os.path.join(directory, CONFIG_FILE))
        if dtype:
            config = config.model_copy(update={"dtype": dtype})
        return cls(config, load_parameters(params_path))

    # ------------------------------------------------------------------
    # Forward pieces
    # ------------------------------------------------------------------

    def _grid_input(self, grid, which: str) -> Tensor:
        cfg = self.config
        grid_cfg = cfg.front_grid if which == "front" else cfg.bev_grid
        data = grid.to_channels() if isinstance(grid, ProjectedGrid) else np.asarray(grid)
        if data.ndim not in (3, 4) or data.shape[-3:] != (NUM_CLASSES + 1, grid_cfg.height, grid_cfg.width):
            raise ShapeError(f"{which} grid {data.shape} does not match {grid_cfg.height}×{grid_cfg.width}")
        data = np.take(data, cfg.input_channels, axis=-3)
        return constant(data.astype(self.dtype, copy=False))

    def encode(self, grid, which: str) -> Tensor:
        """Run the ``front`` or ``bev`` encoder on a grid (21×H×W or N×21×H×W)."""
        if which not in ("front", "bev"):
            raise InvalidArgumentError(f"unknown encoder '{which}'")
        if (which == "front" and not self.config.uses_front) or (which == "bev" and not self.config.uses_bev):
            raise InvalidArgumentError(f"the {which} encoder is disabled by the perspective setting")
        stages = self.config.front_stages if which == "front" else self.config.bev_stages
        return run_encoder(self.params, which, stages, self._grid_input(grid, which), self.config.standardize)

    def fuse(self, front_features: Optional[Tensor], bev_features: Optional[Tensor]) -> Tensor:
        """Concatenate channels, point-wise conv, global average pool, dense to the latent."""
        features = [f for f in (front_features, bev_features) if f is not None]
        if len(features) == 2 and features[0].shape != features[1].shape:
            raise ShapeError(f"feature maps differ: {features[0].shape} vs {features[1].shape}")
        x = features[0] if len(features) == 1 else ops.concat(features, axis=-3)
        x = ops.relu(ops.pointwise_conv(x, self.params["fusion.pointwise.weight"], self.params["fusion.pointwise.bias"]))
        x = ops.global_avg_pool(x)
        return ops.dense(x, self.params["fusion.dense.weight"], self.params["fusion.dense.bias"])

    def gru_input(self, wp_prev: Tensor, route: np.ndarray, omega: np.ndarray) -> Tensor:
        cfg = self.config
        scaled = np.concatenate([np.asarray(route) * cfg.route_scale, np.asarray(omega) * cfg.omega_scale], axis=-1)
        return ops.concat([ops.scale(wp_prev, cfg.waypoint_scale), constant(scaled.astype(self.dtype))], axis=-1)

    def decode_step(self, hidden: Tensor, wp_prev: Tensor, route: np.ndarray, omega: np.ndarray):
        """
        One GRU step biased by the previous waypoint, route points and wheel speeds.

        Returns:
            (hidden', delta) with delta = [dx, dy] in meters
        """
        p = self.params
        x = self.gru_input(wp_prev, route, omega)
        hidden = ops.gru_cell(x, hidden, p["gru.w_ih"], p["gru.w_hh"], p["gru.b_ih"], p["gru.b_hh"])
        dx = ops.dense(hidden, p["head.dx.weight"], p["head.dx.bias"])
        dy = ops.dense(hidden, p["head.dy.weight"], p["head.dy.bias"])
        return hidden, ops.concat([dx, dy], axis=-1)

    def control_heads(self, hidden: Tensor, command):
        """
        Command-selected MLP on the final hidden state.

        Returns:
            (steering in [-1, 1], throttle in [0, 1]), each N×1 (or 1-element when unbatched)
        """
        cmd = np.atleast_1d(np.asarray(command, dtype=np.int64))
        if cmd.size and (cmd.min() < 0 or cmd.max() >= self.config.num_commands):
            raise InvalidArgumentError(f"command must lie in [0, {self.config.num_commands})")
        depth = len(self.config.mlp_hidden)
        if hidden.ndim == 1:
            raw = run_mlp(self.params, f"mlp{int(cmd[0])}", depth, hidden)
        else:
            # MLPs of commands absent from the batch stay off the graph
            zeros = constant(np.zeros((len(cmd), 2), dtype=self.dtype))
            candidates = [
                run_mlp(self.params, f"mlp{c}", depth, hidden) if np.any(cmd == c) else zeros
                for c in range(self.config.num_commands)
            ]
            raw = ops.route_by_index(candidates, cmd)
        steering = ops.tanh(ops.take_columns(raw, 0, 1))
        throttle = ops.sigmoid(ops.take_columns(raw, 1, 2))
        return steering, throttle

    def forward(self, batch: ModelBatch) -> ForwardPass:
        """Encoders, fusion, three decode steps with waypoint accumulation, control heads."""
        cfg = self.config
        front = self.encode(batch.front, "front") if cfg.uses_front else None
        bev = self.encode(batch.bev, "bev") if cfg.uses_bev else None
        latent = self.fuse(front, bev)

        n = len(batch)
        wp = constant(np.zeros((n, 2), dtype=self.dtype))
        hidden = latent
        deltas, waypoints = [], []
        for _ in range(cfg.waypoint_steps):
            hidden, delta = self.decode_step(hidden, wp, batch.route, batch.omega)
            wp = ops.add(wp, delta)
            deltas.append(delta)
            waypoints.append(wp)
        steering, throttle = self.control_heads(hidden, batch.command)
        return ForwardPass(latent, deltas, ops.concat(waypoints, axis=-1), steering, throttle)

    def predict(self, obs: ObservationInput) -> ModelOutput:
        """Single-observation inference."""
        out = self.forward(ModelBatch.from_observations([obs]))
        wps = out.waypoints.data[0].reshape(-1, 2)
        return ModelOutput(
            waypoints=[LocalPoint(float(x), float(y)) for x, y in wps],
            steering=float(out.steering.data[0, 0]),
            throttle=float(out.throttle.data[0, 0]),
        )

    def predict_batch(self, batch: ModelBatch) -> Dict[str, np.ndarray]:
        out = self.forward(batch)
        return {
            "waypoints": out.waypoints.data.astype(np.float64),
            "steering": out.steering.data[:, 0].astype(np.float64),
            "throttle": out.throttle.data[:, 0].astype(np.float64),
        }


def describe(model: DrivingNetwork) -> str:
    counts = {}
    for name, p in model.params.items():
        group = name.split(".")[0]
        counts[group] = counts.get(group, 0) + p.size
    return json.dumps({"total": model.parameter_count(), **counts}, indent=2)
