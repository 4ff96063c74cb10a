"""Deterministic simulator and training engine for resilient multi-UAV
coverage over an aerial-ground network."""

from .world import (
    GBS_ID,
    ChannelProfile,
    MobilityParams,
    ScenarioConfig,
    WorldState,
    active_set,
    apply_failure,
    make_scenario,
)
from .env import CoverageEnv
from .metrics import RewardWeights, StepMetrics
from .power import RotorcraftParams
from .train import TrainConfig

__all__ = [
    "GBS_ID",
    "ChannelProfile",
    "MobilityParams",
    "ScenarioConfig",
    "WorldState",
    "active_set",
    "apply_failure",
    "make_scenario",
    "CoverageEnv",
    "RewardWeights",
    "StepMetrics",
    "RotorcraftParams",
    "TrainConfig",
]

__version__ = "0.1.0"
