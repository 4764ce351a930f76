"""Candidate box proposal on uncropped smear images.

The chain is saturation -> multi-scale LoG -> Otsu -> opening -> dilation ->
component centroids -> one square box per centroid and box size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage, signal

from .imaging import check_binary, check_gray, check_rgb, rgb_to_saturation

__all__ = [
    "RoiConfig",
    "RoiCandidate",
    "OtsuResult",
    "log_kernel",
    "multiscale_log",
    "otsu_from_histogram",
    "otsu_threshold",
    "erode",
    "dilate",
    "open_",
    "components_centroids",
    "roi_stages",
    "propose_rois",
]

_SQUARE = np.ones((3, 3), dtype=bool)
_FLAT_EPS = 1e-10


@dataclass
class RoiConfig:
    sigmas: list[float] = field(default_factory=lambda: [4.0, 5.0, 6.0, 7.0])
    box_sizes: list[int] = field(default_factory=lambda: [40, 60, 80])
    min_component_area: int = 20
    merge_radius: float = 20.0
    opening_iterations: int = 1
    dilation_iterations: int = 2

    def __post_init__(self):
        if not self.sigmas or any(s <= 0 for s in self.sigmas):
            raise ValueError(f"sigmas must be non-empty and positive: {self.sigmas}")
        if not self.box_sizes or any(b < 8 for b in self.box_sizes):
            raise ValueError(f"box sizes must be non-empty and >= 8: {self.box_sizes}")
        if self.min_component_area < 0 or self.merge_radius < 0:
            raise ValueError("min_component_area and merge_radius must be >= 0")
        if self.opening_iterations < 0 or self.dilation_iterations < 0:
            raise ValueError("morphology iteration counts must be >= 0")


@dataclass(frozen=True)
class RoiCandidate:
    center_x: int
    center_y: int
    box: tuple[int, int, int, int]  # x, y, w, h


class OtsuResult(NamedTuple):
    threshold: int
    mask: np.ndarray
    degenerate: bool


def log_kernel(sigma: float) -> np.ndarray:
    """Sampled Laplacian of Gaussian, side ``2*ceil(3*sigma)+1``, zero-sum."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = math.ceil(3 * sigma)
    y, x = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    q = (x * x + y * y) / (2 * sigma**2)
    k = (q - 1.0) / (math.pi * sigma**4) * np.exp(-q)
    return k - k.mean()


def multiscale_log(sat: np.ndarray, sigmas) -> np.ndarray:
    """Per-pixel max over scales of ``-sigma^2 * (LoG_sigma * sat)``.

    Bright blobs on a dark field give positive peaks. Borders are handled by
    mirror padding (edge pixel repeated).
    """
    check_gray(sat)
    data = np.asarray(sat, dtype=np.float64)
    out = None
    for s in sigmas:
        k = log_kernel(s)
        r = k.shape[0] // 2
        padded = np.pad(data, r, mode="symmetric")
        resp = -(s**2) * signal.fftconvolve(padded, k, mode="valid")
        out = resp if out is None else np.maximum(out, resp)
    # FFT round-off on flat regions would otherwise reach Otsu as texture
    out[np.abs(out) < _FLAT_EPS] = 0.0
    return out


def _quantize(img: np.ndarray) -> np.ndarray | None:
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        return None
    return np.rint((img - lo) * (255.0 / (hi - lo))).astype(np.intp)


def otsu_from_histogram(hist) -> int:
    """Level maximising between-class variance; class 0 is ``level <= t``.

    Exact integer arithmetic, so ties resolve to the smallest ``t``.
    """
    counts = [int(c) for c in hist]
    n_total = sum(counts)
    s_total = sum(i * c for i, c in enumerate(counts))
    best_t, best_num, best_den = 0, 0, 1
    n0 = s0 = 0
    for t in range(len(counts) - 1):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = n_total - n0
        if n0 == 0 or n1 == 0:
            continue
        # omega0*omega1*(mu0-mu1)^2 up to the constant factor 1/N^2
        num = (s0 * n1 - (s_total - s0) * n0) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def otsu_threshold(img: np.ndarray) -> OtsuResult:
    """Otsu binarization after min-max quantizing ``img`` to levels 0..255."""
    check_gray(img)
    levels = _quantize(np.asarray(img, dtype=np.float64))
    if levels is None:
        level = int(np.clip(np.rint(float(img.flat[0])), 0, 255))
        return OtsuResult(level, np.zeros(img.shape, dtype=bool), True)
    hist = np.bincount(levels.ravel(), minlength=256)
    t = otsu_from_histogram(hist)
    return OtsuResult(t, levels > t, False)


def erode(img: np.ndarray, iterations: int = 1) -> np.ndarray:
    check_binary(img)
    if iterations == 0:
        return img.copy()
    return ndimage.binary_erosion(img, structure=_SQUARE, iterations=iterations, border_value=0)


def dilate(img: np.ndarray, iterations: int = 1) -> np.ndarray:
    check_binary(img)
    if iterations == 0:
        return img.copy()
    return ndimage.binary_dilation(img, structure=_SQUARE, iterations=iterations, border_value=0)


def open_(img: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Morphological opening, ``dilate(erode(img))`` with a 3x3 square."""
    return dilate(erode(img, iterations), iterations)


def components_centroids(img: np.ndarray, min_area: int = 0) -> list[tuple[int, int, int]]:
    """8-connected components as ``(center_x, center_y, area)`` tuples.

    Sorted by ``(center_y, center_x)``; components smaller than ``min_area``
    are dropped.
    """
    check_binary(img)
    labels, n = ndimage.label(img, structure=_SQUARE)
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs]
    area = np.bincount(ids, minlength=n + 1)
    sx = np.bincount(ids, weights=xs, minlength=n + 1)
    sy = np.bincount(ids, weights=ys, minlength=n + 1)
    out = []
    for i in range(1, n + 1):
        if area[i] < min_area:
            continue
        cx = int(math.floor(sx[i] / area[i] + 0.5))
        cy = int(math.floor(sy[i] / area[i] + 0.5))
        out.append((cx, cy, int(area[i])))
    out.sort(key=lambda c: (c[1], c[0]))
    return out


def _merge_close(cents, radius):
    # the larger component wins; ties keep scan order
    order = sorted(range(len(cents)), key=lambda i: -cents[i][2])
    kept = []
    for i in order:
        cx, cy, _ = cents[i]
        if all(math.hypot(cx - cents[j][0], cy - cents[j][1]) >= radius for j in kept):
            kept.append(i)
    return sorted((cents[i] for i in kept), key=lambda c: (c[1], c[0]))


def _square_box(cx, cy, size, width, height):
    w, h = min(size, width), min(size, height)
    x = min(max(cx - size // 2, 0), width - w)
    y = min(max(cy - size // 2, 0), height - h)
    return (int(x), int(y), int(w), int(h))


def roi_stages(img: np.ndarray, cfg: RoiConfig | None = None) -> dict:
    """Every intermediate raster of the proposal chain, keyed by stage name."""
    cfg = cfg or RoiConfig()
    check_rgb(img)
    sat = rgb_to_saturation(img)
    log = multiscale_log(sat, cfg.sigmas)
    # Only bright-blob evidence is thresholded. Left in, the negative troughs
    # outside cell edges set the bottom of the quantization range and Otsu
    # then splits troughs from flat background instead of blobs from the rest.
    otsu = otsu_threshold(np.maximum(log, 0.0))
    opened = open_(otsu.mask, cfg.opening_iterations)
    dilated = dilate(opened, cfg.dilation_iterations)
    return {
        "saturation": sat,
        "log": log,
        "otsu": otsu,
        "opened": opened,
        "dilated": dilated,
    }


def propose_rois(img: np.ndarray, cfg: RoiConfig | None = None) -> list[RoiCandidate]:
    cfg = cfg or RoiConfig()
    stages = roi_stages(img, cfg)
    if stages["otsu"].degenerate:
        return []
    cents = components_centroids(stages["dilated"], cfg.min_component_area)
    cents = _merge_close(cents, cfg.merge_radius)
    height, width = img.shape[:2]
    out = []
    for cx, cy, _ in cents:
        for size in cfg.box_sizes:
            out.append(RoiCandidate(cx, cy, _square_box(cx, cy, size, width, height)))
    return out
