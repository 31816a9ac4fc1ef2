"""Disturbance-rejecting tracking controllers for a two-link elbow arm."""
from .controllers import (
    DiscGains,
    DiscontinuousController,
    InvDynGains,
    InverseDynamicsController,
    LyapGains,
    LyapunovController,
    TrajectoryPoint,
    ZeroTorqueController,
)
from .dynamics import JointState, ManipulatorParams
from .sim import DisturbanceSpec, SimConfig, SimResult, metrics, simulate

__all__ = [
    "DiscGains", "DiscontinuousController", "DisturbanceSpec", "InvDynGains",
    "InverseDynamicsController", "JointState", "LyapGains", "LyapunovController",
    "ManipulatorParams", "SimConfig", "SimResult", "TrajectoryPoint",
    "ZeroTorqueController", "metrics", "simulate",
]
