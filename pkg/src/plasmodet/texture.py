"""Gray level co-occurrence matrices and Haralick statistics for ROI crops."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .imaging import crop, luminance

__all__ = [
    "TextureFeatures",
    "compute_glcm",
    "features",
    "roi_features",
    "write_features_csv",
]


@dataclass(frozen=True)
class TextureFeatures:
    contrast: float
    dissimilarity: float
    homogeneity: float
    energy: float
    correlation: float

    def as_dict(self) -> dict:
        return asdict(self)


def compute_glcm(patch: np.ndarray, distance: int = 1, angle: float = 0.0, levels: int = 256) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix of an integer-valued patch.

    The offset is ``(round(d*cos(angle)), -round(d*sin(angle)))`` in (x, y),
    so ``angle=0`` pairs each pixel with its right-hand neighbour.
    """
    patch = np.asarray(patch)
    if patch.ndim != 2:
        raise ValueError("GLCM patch must be 2-D")
    if not np.issubdtype(patch.dtype, np.integer):
        raise ValueError("GLCM patch must hold integer gray levels")
    if patch.size and (patch.min() < 0 or patch.max() >= levels):
        raise ValueError(f"gray levels must lie in [0, {levels})")
    dx = int(round(distance * math.cos(angle)))
    dy = int(round(-distance * math.sin(angle)))
    h, w = patch.shape
    if h <= abs(dy) or w <= abs(dx):
        raise ValueError(f"patch {w}x{h} too small for offset ({dx}, {dy})")
    a = patch[max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)].astype(np.intp)
    b = patch[max(0, dy) : h - max(0, -dy), max(0, dx) : w - max(0, -dx)].astype(np.intp)
    counts = np.bincount((a * levels + b).ravel(), minlength=levels * levels)
    m = counts.reshape(levels, levels).astype(np.float64)
    m += m.T
    total = m.sum()
    if total == 0:
        raise ValueError("patch yields no co-occurrence pairs")
    return m / total


def features(glcm: np.ndarray) -> TextureFeatures:
    p = np.asarray(glcm, dtype=np.float64)
    n = p.shape[0]
    i, j = np.ogrid[:n, :n]
    diff = (i - j).astype(np.float64)
    contrast = float(np.sum(p * diff**2))
    dissimilarity = float(np.sum(p * np.abs(diff)))
    homogeneity = float(np.sum(p / (1.0 + diff**2)))
    energy = float(math.sqrt(np.sum(p * p)))
    mu_i = float(np.sum(i * p))
    mu_j = float(np.sum(j * p))
    sd_i = math.sqrt(float(np.sum(p * (i - mu_i) ** 2)))
    sd_j = math.sqrt(float(np.sum(p * (j - mu_j) ** 2)))
    if sd_i * sd_j == 0:
        correlation = 1.0
    else:
        correlation = float(np.sum(p * (i - mu_i) * (j - mu_j))) / (sd_i * sd_j)
    return TextureFeatures(contrast, dissimilarity, homogeneity, energy, correlation)


def roi_features(img: np.ndarray, box) -> TextureFeatures:
    """Features of the luminance crop under ``box`` (d=1, horizontal)."""
    return features(compute_glcm(luminance(crop(img, tuple(box)))))


def write_features_csv(path, rows) -> None:
    """``rows`` is an iterable of ``(roi_id, TextureFeatures)``."""
    names = [f.name for f in fields(TextureFeatures)]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["roi_id", *names])
        for roi_id, feat in rows:
            out.writerow([roi_id, *(repr(getattr(feat, k)) for k in names)])
