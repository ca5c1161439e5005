# Configuration for the LiDAR driving stack
import json
import os
from typing import List, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigError

load_dotenv()

# Run / output
SEED = int(os.getenv("SEED", "0"))
OUT_DIR = os.getenv("OUT_DIR", "./runs")
SQLITE_DB_PATH = os.getenv("SQLITE_DB_PATH", "./runs/registry.db")
SCENE_DIRECTORY = os.getenv("SCENE_DIRECTORY", os.path.join(os.path.dirname(os.path.abspath(__file__)), "simulation", "scenes"))
SHOW_PROGRESS = os.getenv("SHOW_PROGRESS", "1") == "1"
DEBUG_CHECKS = os.getenv("DEBUG_CHECKS", "0") == "1"

# Vehicle (WHILL-like differential drive)
WHEEL_RADIUS = float(os.getenv("WHEEL_RADIUS", "0.15"))
TRACK_WIDTH = float(os.getenv("TRACK_WIDTH", "0.55"))
MAX_SPEED = float(os.getenv("MAX_SPEED", "1.25"))
MAX_YAW_RATE = float(os.getenv("MAX_YAW_RATE", "1.0"))
SPEED_LAG_TAU = float(os.getenv("SPEED_LAG_TAU", "0.5"))
LOG_RATE_HZ = float(os.getenv("LOG_RATE_HZ", "4"))

# Route structure
ROUTE_GAP = float(os.getenv("ROUTE_GAP", "12.0"))
FINISH_RADIUS = float(os.getenv("FINISH_RADIUS", "2.0"))
ROUTE_REACH_RADIUS = float(os.getenv("ROUTE_REACH_RADIUS", "4.0"))

# Projection
MAX_DEPTH = float(os.getenv("MAX_DEPTH", "80.0"))
NUM_CLASSES = 20

# LiDAR
LIDAR_PROFILE = os.getenv("LIDAR_PROFILE", "desk")
LIDAR_MOUNT_HEIGHT = float(os.getenv("LIDAR_MOUNT_HEIGHT", "1.0"))
LIDAR_MAX_RANGE = float(os.getenv("LIDAR_MAX_RANGE", "40.0"))

# Sensors
GNSS_NOISE_STD = float(os.getenv("GNSS_NOISE_STD", "0.3"))

# Training recipe
BATCH_SIZE = int(os.getenv("BATCH_SIZE", "10"))
LEARNING_RATE = float(os.getenv("LEARNING_RATE", "1e-4"))
WEIGHT_DECAY = float(os.getenv("WEIGHT_DECAY", "1e-3"))
LR_PATIENCE = int(os.getenv("LR_PATIENCE", "5"))
EARLY_STOP_PATIENCE = int(os.getenv("EARLY_STOP_PATIENCE", "30"))
MAX_EPOCHS = int(os.getenv("MAX_EPOCHS", "60"))

# Evaluation
EVAL_REPEATS = int(os.getenv("EVAL_REPEATS", "3"))

# Traffic conditions: parked cars / walking pedestrians per scene
CONDITIONS = {
    "sparse": {"parked": 1, "walkers": 1},
    "moderate": {"parked": 3, "walkers": 2},
    "dense": {"parked": 6, "walkers": 4},
}

# Semantic classes (SemanticKITTI order)
CLASS_NAMES = [
    "none", "car", "bicycle", "motorcycle", "truck", "other-vehicle", "person",
    "bicyclist", "motorcyclist", "road", "parking", "sidewalk", "ground",
    "building", "fence", "vegetation", "trunk", "terrain", "pole", "traffic-sign",
]
TRAVERSABLE_CLASSES = (9, 10, 11)
GROUND_CLASSES = (9, 10, 11, 12, 17)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Section):
    """Raster layout for one projection perspective."""

    mode: Literal["front", "bev"]
    height: int = Field(gt=0)
    width: int = Field(gt=0)
    azimuth_range: Tuple[float, float] = (-90.0, 90.0)
    elevation_range: Tuple[float, float] = (-30.67, 10.67)
    forward_range: Tuple[float, float] = (0.0, 16.0)
    lateral_range: Tuple[float, float] = (-16.0, 16.0)
    max_depth: float = Field(default=MAX_DEPTH, gt=0)

    @classmethod
    def front_default(cls) -> "GridConfig":
        return cls(mode="front", height=64, width=512)

    @classmethod
    def bev_default(cls) -> "GridConfig":
        return cls(mode="bev", height=128, width=256)


class StageSpec(_Section):
    """One encoder stage: parallel convs (one per dilation), ReLU, pooling."""

    out_channels: int = Field(gt=0)
    kernel: int = Field(default=3, gt=0)
    dilations: List[int] = Field(default_factory=lambda: [1])
    pool: Tuple[int, int] = (2, 2)
    pool_kind: Literal["max", "avg"] = "max"

    @model_validator(mode="after")
    def _check(self):
        if any(d < 1 for d in self.dilations):
            raise ValueError("dilation must be >= 1")
        if self.kernel % 2 == 0:
            raise ValueError("kernel must be odd to keep the spatial size")
        if self.out_channels % len(self.dilations):
            raise ValueError("out_channels must split evenly across dilations")
        return self


def _front_stages() -> List[StageSpec]:
    return [
        StageSpec(out_channels=8, dilations=[1, 2], pool=(2, 4)),
        StageSpec(out_channels=16, pool=(2, 4)),
        StageSpec(out_channels=32, pool=(2, 2)),
        StageSpec(out_channels=64, pool=(2, 2)),
    ]


def _bev_stages() -> List[StageSpec]:
    return [
        StageSpec(out_channels=8, dilations=[1, 2], pool=(4, 4)),
        StageSpec(out_channels=16, pool=(2, 2)),
        StageSpec(out_channels=32, pool=(2, 2)),
        StageSpec(out_channels=64, pool=(2, 2)),
    ]


class ModelConfig(_Section):
    """Network layout. Both encoders must end at the same feature-map shape."""

    front_grid: GridConfig = Field(default_factory=GridConfig.front_default)
    bev_grid: GridConfig = Field(default_factory=GridConfig.bev_default)
    front_stages: List[StageSpec] = Field(default_factory=_front_stages)
    bev_stages: List[StageSpec] = Field(default_factory=_bev_stages)
    fusion_channels: int = 64
    latent_size: int = 192
    mlp_hidden: List[int] = Field(default_factory=lambda: [64, 64])
    num_commands: int = 3
    waypoint_steps: int = 3
    input_variant: Literal["segmentation_depth", "segmentation", "depth"] = "segmentation_depth"
    perspective: Literal["front_bev", "front", "bev"] = "front_bev"
    standardize: bool = False
    route_scale: float = 1.0 / ROUTE_GAP
    waypoint_scale: float = 1.0 / ROUTE_GAP
    omega_scale: float = WHEEL_RADIUS
    wheel_radius: float = WHEEL_RADIUS
    init_seed: int = SEED
    dtype: Literal["float64", "float32"] = "float32"

    @property
    def input_channels(self) -> List[int]:
        if self.input_variant == "segmentation":
            return list(range(NUM_CLASSES))
        if self.input_variant == "depth":
            return [NUM_CLASSES]
        return list(range(NUM_CLASSES + 1))

    @property
    def uses_front(self) -> bool:
        return self.perspective in ("front_bev", "front")

    @property
    def uses_bev(self) -> bool:
        return self.perspective in ("front_bev", "bev")


class TrainConfig(_Section):
    batch_size: int = Field(default=BATCH_SIZE, gt=0)
    learning_rate: float = Field(default=LEARNING_RATE, gt=0)
    weight_decay: float = Field(default=WEIGHT_DECAY, ge=0)
    lr_patience: int = Field(default=LR_PATIENCE, gt=0)
    lr_factor: float = Field(default=0.5, gt=0, lt=1)
    early_stop_patience: int = Field(default=EARLY_STOP_PATIENCE, gt=0)
    max_epochs: int = Field(default=MAX_EPOCHS, gt=0)
    val_fraction: float = Field(default=0.33, gt=0, lt=1)
    seed: int = SEED
    mgn_enabled: bool = True
    mgn_power: float = Field(default=0.5, gt=0)
    mgn_smoothing: float = Field(default=0.9, ge=0, lt=1)
    mgn_shared: str = "fusion.dense"
    sample_stride: int = Field(default=1, gt=0)
    show_progress: bool = SHOW_PROGRESS


class PidGains(_Section):
    kp: float
    ki: float
    kd: float


class ControllerConfig(_Section):
    lateral: PidGains = PidGains(kp=0.02, ki=0.001, kd=0.005)
    longitudinal: PidGains = PidGains(kp=0.8, ki=0.1, kd=0.0)
    deadband: float = 0.1
    speed_gain: float = 1.75
    dt: float = 1.0 / LOG_RATE_HZ
    wheel_radius: float = WHEEL_RADIUS
    use_logged_commands: bool = False


class LidarConfig(_Section):
    rings: int = Field(default=16, gt=0)
    azimuth_steps: int = Field(default=360, gt=0)
    elevation_range: Tuple[float, float] = (-30.67, 10.67)
    max_range: float = Field(default=LIDAR_MAX_RANGE, gt=0)
    mount_height: float = Field(default=LIDAR_MOUNT_HEIGHT, gt=0)

    @classmethod
    def profile(cls, name: str = LIDAR_PROFILE) -> "LidarConfig":
        if name == "full":
            return cls(rings=32, azimuth_steps=1080)
        return cls()


class SimConfig(_Section):
    dt: float = 1.0 / LOG_RATE_HZ
    max_speed: float = MAX_SPEED
    max_yaw_rate: float = MAX_YAW_RATE
    speed_tau: float = SPEED_LAG_TAU
    wheel_radius: float = WHEEL_RADIUS
    track_width: float = TRACK_WIDTH
    gnss_noise: float = GNSS_NOISE_STD
    gyro_noise: float = 0.005
    accel_noise: float = 0.05
    mag_noise: float = 0.02
    wheel_noise: float = 0.0
    vehicle_radius: float = 0.5
    monitor_horizon: float = 1.5
    monitor_clearance: float = 0.3
    min_takeover: float = 1.0
    lookahead: float = 2.5
    conditions: List[str] = Field(default_factory=lambda: list(CONDITIONS))
    scenes: List[str] = Field(default_factory=lambda: ["campus_north", "campus_south", "campus_east"])
    workers: int = Field(default=1, gt=0)
    log_forward_only: bool = True


class EvalConfig(_Section):
    repeats: int = Field(default=EVAL_REPEATS, gt=0)
    timeout_factor: float = Field(default=3.0, gt=1)
    skip_corrupt: bool = True
    split: Literal["trainval", "test"] = "test"


class AppConfig(_Section):
    """Top-level configuration file: {model, train, controller, lidar, sim, eval}."""

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    lidar: LidarConfig = Field(default_factory=LidarConfig.profile)
    sim: SimConfig = Field(default_factory=SimConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @classmethod
    def load(cls, path: Optional[str] = None) -> "AppConfig":
        """
        Load configuration from a JSON file, falling back to defaults.

        Args:
            path: JSON file with any subset of the sections

        Returns:
            Validated AppConfig
        """
        if not path:
            return cls()
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
            return cls.model_validate(raw)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except ValidationError as e:
            raise ConfigError(f"invalid config {path}: {e}") from e


def load_model_config(path: str) -> ModelConfig:
    """Read a ModelConfig JSON written beside a checkpoint."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            return ModelConfig.model_validate_json(f.read())
    except (OSError, ValidationError) as e:
        raise ConfigError(f"invalid model config {path}: {e}") from e
