"""Driving agents: control policy, model-driven agent, expert and episode orchestrator."""
from .controller import (
    AimGeometry,
    Command,
    ControlCommand,
    ControlPolicy,
    ControlWeights,
    PidState,
    aim_geometry,
    derive_command,
    fuse_controls,
    init_control_weights,
    linear_speed,
    pid_step,
)
from .expert_agent import ExpertAgent, densify, expert_policy
from .model_agent import ConstantModel, DrivingAgent, OracleModel, Predictor, RouteFollower, RouteObservation, ZeroModel

# orchestrator depends on the simulation package, which itself imports the
# controller; import it by module path.

__all__ = [
    "AimGeometry",
    "Command",
    "ControlCommand",
    "ControlPolicy",
    "ControlWeights",
    "PidState",
    "aim_geometry",
    "derive_command",
    "fuse_controls",
    "init_control_weights",
    "linear_speed",
    "pid_step",
    "ExpertAgent",
    "densify",
    "expert_policy",
    "ConstantModel",
    "DrivingAgent",
    "OracleModel",
    "Predictor",
    "RouteFollower",
    "RouteObservation",
    "ZeroModel",
]
