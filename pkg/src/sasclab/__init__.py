"""sasclab: a deterministic shared-control laboratory for a planar lander.

The package wires four capabilities around one simulated craft: a learned
linear-operator model of the dynamics, a safety-only receding-horizon policy,
an accept/reject/replace control allocator, and behavior-cloning imitation.
Trials run headless with scripted surrogate pilots or live through a
WebSocket cockpit; every trial is logged and bit-exactly replayable.
"""

from .config import (
    EnvLayout,
    LabConfig,
    NoviceParams,
    PhysicsParams,
    PilotGains,
    SafetyConfig,
    SafetyCostParams,
    SessionParams,
    TrainParams,
    load_config,
)
from .world import (
    EnvId,
    Environment,
    TrialStatus,
    CrashReason,
    classify_outcome,
    distance_to_nearest_obstacle,
    make_environment,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "EnvId",
    "EnvLayout",
    "Environment",
    "LabConfig",
    "NoviceParams",
    "PhysicsParams",
    "PilotGains",
    "SafetyConfig",
    "SafetyCostParams",
    "SessionParams",
    "TrainParams",
    "TrialStatus",
    "CrashReason",
    "classify_outcome",
    "distance_to_nearest_obstacle",
    "load_config",
    "make_environment",
    "step",
]
