"""Desk-scale reproduction rig: synthetic corpus, tiny classifier, attributions."""

from .config import NEGATIVE_LABEL, POSITIVE_LABEL, SyntheticTaskConfig
from .corpus import Corpus, Example, generate_corpus
from .model import (
    Checkpoint,
    SgdMomentum,
    TinyClassifier,
    evaluate_accuracy,
    grad_x_input_attribution,
    train_epoch,
)
from .experiment import (
    ExperimentResult,
    SeedRun,
    TrainSettings,
    clean_task_config,
    run_experiment,
    shortcut_task_config,
)

__all__ = [
    "Checkpoint",
    "Corpus",
    "Example",
    "ExperimentResult",
    "NEGATIVE_LABEL",
    "POSITIVE_LABEL",
    "SeedRun",
    "SgdMomentum",
    "SyntheticTaskConfig",
    "TinyClassifier",
    "TrainSettings",
    "clean_task_config",
    "evaluate_accuracy",
    "generate_corpus",
    "grad_x_input_attribution",
    "run_experiment",
    "shortcut_task_config",
    "train_epoch",
]
