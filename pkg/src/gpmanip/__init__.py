"""Self-identified local manipulation models with random-shooting MPC.

A hand-object system (here a synthetic plant) identifies its own local
control-to-motion model pair online from a handful of exploratory actions
via Gaussian process regression, tracks reference trajectories with
sampling-based model predictive control, re-identifies when the tracking
error crosses a threshold, and can transfer its dataset between setups.
"""

from .gp import GPModel, IllConditionedDataError, KernelParams, fit, predict_mean, rbf_kernel
from .identify import (
    Dataset,
    DegenerateDatasetError,
    ExplorationConfig,
    ManipulationModels,
    fit_manipulation_models,
    local_density,
    random_control,
    select_exploratory_control,
    self_identify,
    transfer_models,
)
from .loop import (
    LoopConfig,
    ReferenceTrajectory,
    TaskResult,
    manipulation_error,
    run_task,
    trace_metrics,
)
from .mpc import MpcConfig, interpolate, mpc_step, nearest_waypoint, plan_step, rollout
from .plant import PRESETS, Plant, PlantPreset, get_preset, load_preset
from .trajectories import make_trajectory

__all__ = [
    "Dataset",
    "DegenerateDatasetError",
    "ExplorationConfig",
    "GPModel",
    "IllConditionedDataError",
    "KernelParams",
    "LoopConfig",
    "ManipulationModels",
    "MpcConfig",
    "PRESETS",
    "Plant",
    "PlantPreset",
    "ReferenceTrajectory",
    "TaskResult",
    "fit",
    "fit_manipulation_models",
    "get_preset",
    "interpolate",
    "load_preset",
    "local_density",
    "make_trajectory",
    "manipulation_error",
    "mpc_step",
    "nearest_waypoint",
    "plan_step",
    "predict_mean",
    "random_control",
    "rbf_kernel",
    "rollout",
    "run_task",
    "select_exploratory_control",
    "self_identify",
    "trace_metrics",
    "transfer_models",
]

__version__ = "0.1.0"
