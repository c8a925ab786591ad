"""Shoulder-complex IK, online joint-muscle mapping, and steering-task simulator."""

from .model import (
    JointVector,
    RobotModel,
    load_default_model,
    load_robot_model,
)
from .transforms import Pose

__version__ = "0.1.0"

__all__ = [
    "JointVector",
    "Pose",
    "RobotModel",
    "load_default_model",
    "load_robot_model",
    "__version__",
]
