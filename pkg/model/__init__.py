# The LiDAR driving network
from .network import DrivingNetwork, ForwardPass, ModelBatch, ModelOutput, ObservationInput, describe

__all__ = ["DrivingNetwork", "ForwardPass", "ModelBatch", "ModelOutput", "ObservationInput", "describe"]
