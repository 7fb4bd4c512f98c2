"""The FCTL training protocol and experiment runner."""

from fctl.training.config import TrainConfig, build_config, load_train_config
from fctl.training.experiment import ExperimentReport, run_experiment
from fctl.training.trainer import (
    StepRecord,
    TrainResult,
    evaluate,
    train_baseline,
    train_fctl,
    train_ideal,
)

__all__ = [
    "ExperimentReport",
    "StepRecord",
    "TrainConfig",
    "TrainResult",
    "build_config",
    "evaluate",
    "load_train_config",
    "run_experiment",
    "train_baseline",
    "train_fctl",
    "train_ideal",
]
