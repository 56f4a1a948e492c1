"""Sampling-based maximum-entropy IRL for driving reward functions."""

__version__ = "0.1.0"

from .types import (Control, Demonstration, FeatureVector, OccupancyGrid,
                    ReferencePath, RewardParams, SampleSet, SamplerConfig,
                    Scenario, State, TrainConfig, Trajectory,
                    FEATURE_NAMES, NONINTERACTIVE_FEATURES,
                    validate_demonstration)
from .dynamics import VehicleParams, check_feasible, rollout, step

__all__ = [
    "Control", "Demonstration", "FeatureVector", "OccupancyGrid",
    "ReferencePath", "RewardParams", "SampleSet", "SamplerConfig",
    "Scenario", "State", "TrainConfig", "Trajectory", "VehicleParams",
    "FEATURE_NAMES", "NONINTERACTIVE_FEATURES",
    "validate_demonstration", "check_feasible", "rollout", "step",
    "__version__",
]
