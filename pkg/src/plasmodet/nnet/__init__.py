"""From-scratch CNN: layers, model, augmentation, training and weight files."""
from .augment import AugmentConfig, augment
from .io import CorruptModelError, load_params, save_params
from .model import (
    DEFAULT_ARCH,
    Adam,
    Architecture,
    ModelParams,
    TrainingAborted,
    backward,
    backward_and_step,
    forward,
    forward_batch,
    init_params,
    predict_proba,
)
from .train import EpochRecord, TrainConfig, to_batch, train, write_log_csv

__all__ = [
    "AugmentConfig",
    "augment",
    "CorruptModelError",
    "load_params",
    "save_params",
    "DEFAULT_ARCH",
    "Adam",
    "Architecture",
    "ModelParams",
    "TrainingAborted",
    "backward",
    "backward_and_step",
    "forward",
    "forward_batch",
    "init_params",
    "predict_proba",
    "EpochRecord",
    "TrainConfig",
    "to_batch",
    "train",
    "write_log_csv",
]
