"""Training loop: augment, hold out a validation slice, run Adam epochs."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .augment import AugmentConfig, augment
from .model import DEFAULT_ARCH, Adam, Architecture, ModelParams, init_params, predict_proba, train_step

__all__ = ["TrainConfig", "EpochRecord", "train", "to_batch", "write_log_csv"]

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 25
    dropout_p: float = 0.5
    rng_seed: int = 0
    validation_count: int = 100

    def __post_init__(self):
        if not 0 <= self.dropout_p < 1:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0 or self.validation_count < 0:
            raise ValueError("epochs and validation_count must be >= 0")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_acc: float
    val_acc: float
    loss: float


def to_batch(images: np.ndarray, dtype=np.float32) -> np.ndarray:
    """uint8 ``(N, H, W, 3)`` -> float in [0, 1]."""
    return images.astype(dtype) / dtype(255.0)


def _accuracy(params, images, labels, batch_size):
    if len(images) == 0:
        return float("nan")
    probs = np.concatenate(
        [predict_proba(params, to_batch(images[i : i + batch_size])) for i in range(0, len(images), batch_size)]
    )
    return float(np.mean(probs.argmax(axis=1) == labels))


def train(
    images: np.ndarray,
    labels: np.ndarray,
    train_cfg: TrainConfig | None = None,
    aug_cfg: AugmentConfig | None = None,
    arch: Architecture = DEFAULT_ARCH,
    on_epoch: Callable[[int, ModelParams], None] | None = None,
):
    """Train from uint8 patches; returns ``(best params, list[EpochRecord])``.

    Validation images are drawn from the augmented pool, as in the original
    protocol; variants of one source can land on both sides of the split, so
    validation accuracy is optimistic. ``on_epoch(epoch, params)`` is called
    after every epoch with the live parameters.
    """
    tc = train_cfg or TrainConfig()
    ac = aug_cfg or AugmentConfig()
    labels = np.asarray(labels)
    if set(np.unique(labels).tolist()) != {0, 1}:
        raise ValueError("training data must contain both classes 0 and 1")
    params = init_params(arch, tc.rng_seed)
    if tc.epochs == 0:
        return params, []

    pool, pool_labels = augment(images, labels, ac)
    rng = np.random.default_rng(tc.rng_seed)
    order = rng.permutation(len(pool))
    n_val = min(tc.validation_count, len(pool) - 1)
    val_idx, train_idx = order[:n_val], order[n_val:]
    x_val, y_val = pool[val_idx], pool_labels[val_idx]
    eye = np.eye(arch.classes, dtype=np.float32)

    opt = Adam(params, lr=tc.learning_rate)
    best, best_acc = params.copy(), -1.0
    history = []
    for epoch in range(1, tc.epochs + 1):
        perm = rng.permutation(train_idx)
        correct, seen, losses = 0, 0, []
        for start in range(0, len(perm), tc.batch_size):
            idx = perm[start : start + tc.batch_size]
            xb = to_batch(pool[idx])
            yb = pool_labels[idx]
            loss, probs = train_step(params, opt, xb, eye[yb], rng, tc.dropout_p)
            # running accuracy of the pre-step model, dropout on
            correct += int(np.sum(probs.argmax(axis=1) == yb))
            losses.append(loss * len(idx))
            seen += len(idx)
        train_acc = correct / seen
        val_acc = _accuracy(params, x_val, y_val, 64)
        rec = EpochRecord(epoch, train_acc, val_acc, float(np.sum(losses) / seen))
        history.append(rec)
        log.info("epoch %d train_acc %.4f val_acc %.4f loss %.4f", *(rec.epoch, rec.train_acc, rec.val_acc, rec.loss))
        if val_acc >= best_acc:  # ties go to the later, longer-trained epoch
            best, best_acc = params.copy(), val_acc
        if on_epoch is not None:
            on_epoch(epoch, params)
    return best, history


def write_log_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["epoch", "train_acc", "val_acc", "loss"])
        for r in history:
            out.writerow([r.epoch, repr(r.train_acc), repr(r.val_acc), repr(r.loss)])
