"""Class-balancing augmentation by random translation, rotation and zoom."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = ["AugmentConfig", "affine_patch", "augment"]


@dataclass
class AugmentConfig:
    max_translate_frac: float = 0.10
    max_rotate_deg: float = 20.0
    zoom_range: tuple[float, float] = (0.9, 1.1)
    target_per_class: int = 2000
    rng_seed: int = 0

    def __post_init__(self):
        lo, hi = self.zoom_range
        if not (0 < lo <= hi):
            raise ValueError(f"zoom range must satisfy 0 < low <= high, got {self.zoom_range}")
        if self.max_translate_frac < 0 or self.max_rotate_deg < 0:
            raise ValueError("translation and rotation limits must be >= 0")
        if self.target_per_class < 1:
            raise ValueError("target_per_class must be >= 1")


def affine_patch(img: np.ndarray, tx: float, ty: float, angle_deg: float, zoom: float) -> np.ndarray:
    """Rotate and zoom about the patch centre, then shift by ``(tx, ty)`` px.

    Bilinear sampling, mirror fill outside the source. Identity parameters
    return the input unchanged.
    """
    h, w = img.shape[:2]
    a = math.radians(angle_deg)
    cos, sin = math.cos(a), math.sin(a)
    # output (row, col) -> input (row, col)
    inv = np.array([[cos, sin], [-sin, cos]]) / zoom
    centre = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    shift = np.array([ty, tx])
    offset = centre - inv @ (centre + shift)
    matrix = np.eye(3)
    matrix[:2, :2] = inv
    full_offset = np.array([offset[0], offset[1], 0.0])
    out = ndimage.affine_transform(
        img.astype(np.float64), matrix, offset=full_offset, order=1, mode="reflect"
    )
    if img.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out.astype(img.dtype)


def augment(images: np.ndarray, labels: np.ndarray, cfg: AugmentConfig | None = None):
    """Emit exactly ``cfg.target_per_class`` random variants per class.

    Sources are drawn round-robin from a seeded shuffle of each class so
    every source is used about equally. Returns ``(images, labels)`` grouped
    by ascending label.
    """
    cfg = cfg or AugmentConfig()
    images = np.asarray(images)
    labels = np.asarray(labels)
    if len(images) == 0 or len(images) != len(labels):
        raise ValueError("augment needs a non-empty, equally long image and label set")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError(f"augment needs both classes, found {classes.tolist()}")
    rng = np.random.default_rng(cfg.rng_seed)
    h, w = images.shape[1:3]
    out_imgs, out_labels = [], []
    for cls in classes:
        src = np.flatnonzero(labels == cls)
        order = rng.permutation(src)
        for i in range(cfg.target_per_class):
            if i and i % len(order) == 0:
                order = rng.permutation(src)
            img = images[order[i % len(order)]]
            tx = rng.uniform(-cfg.max_translate_frac, cfg.max_translate_frac) * w
            ty = rng.uniform(-cfg.max_translate_frac, cfg.max_translate_frac) * h
            ang = rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg)
            zoom = rng.uniform(*cfg.zoom_range)
            out_imgs.append(affine_patch(img, tx, ty, ang, zoom))
            out_labels.append(cls)
    return np.stack(out_imgs), np.asarray(out_labels, dtype=labels.dtype)
