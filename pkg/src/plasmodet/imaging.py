"""Pixel containers and the basic raster operations shared by every stage.

Images are plain numpy arrays, row-major with the origin at the top-left:

* RGB image: ``uint8`` array of shape ``(height, width, 3)``
* gray image: float array of shape ``(height, width)``
* binary image: ``bool`` array of shape ``(height, width)``
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "check_rgb",
    "check_gray",
    "check_binary",
    "rgb_to_saturation",
    "resize",
    "normalize_patch",
    "luminance",
    "crop",
    "read_rgb",
    "write_rgb",
]


def check_rgb(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.dtype != np.uint8:
        raise ValueError("RGB image must be a uint8 numpy array")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"RGB image must have shape (h, w, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("RGB image must be at least 1x1")
    return img


def check_gray(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 2:
        raise ValueError("gray image must be a 2-D numpy array")
    if img.size == 0:
        raise ValueError("gray image must be non-empty")
    if not np.all(np.isfinite(img)):
        raise ValueError("gray image contains non-finite values")
    return img


def check_binary(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 2 or img.dtype != bool:
        raise ValueError("binary image must be a 2-D bool numpy array")
    return img


def rgb_to_saturation(img: np.ndarray) -> np.ndarray:
    """HSV saturation, ``(max - min) / max`` per pixel, 0 where max is 0."""
    check_rgb(img)
    rgb = img.astype(np.float64)
    hi = rgb.max(axis=2)
    lo = rgb.min(axis=2)
    sat = np.zeros_like(hi)
    nz = hi > 0
    sat[nz] = (hi[nz] - lo[nz]) / hi[nz]
    return sat


def _axis_weights(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centre alignment, clamped at the edges
    pos = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, pos - i0


def resize(img: np.ndarray, w: int, h: int) -> np.ndarray:
    """Bilinear resize of an RGB image to ``w`` x ``h`` pixels."""
    check_rgb(img)
    if w < 1 or h < 1:
        raise ValueError(f"target size must be positive, got {w}x{h}")
    src_h, src_w = img.shape[:2]
    if (src_w, src_h) == (w, h):
        return img.copy()
    y0, y1, fy = _axis_weights(src_h, h)
    x0, x1, fx = _axis_weights(src_w, w)
    data = img.astype(np.float64)
    top = data[y0][:, x0] * (1 - fx)[None, :, None] + data[y0][:, x1] * fx[None, :, None]
    bot = data[y1][:, x0] * (1 - fx)[None, :, None] + data[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def normalize_patch(img: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Scale bytes to [0, 1]; shape stays ``(h, w, 3)``."""
    check_rgb(img)
    return img.astype(dtype) / dtype(255.0)


def luminance(img: np.ndarray) -> np.ndarray:
    """Rec. 601 luma quantized to integer levels 0..255 (returned as uint8)."""
    check_rgb(img)
    rgb = img.astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


def crop(img: np.ndarray, box: tuple[int, int, int, int]) -> np.ndarray:
    x, y, w, h = box
    H, W = img.shape[:2]
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > W or y + h > H:
        raise ValueError(f"box {box} outside {W}x{H} image")
    return img[y : y + h, x : x + w]


def read_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("RGB"), dtype=np.uint8)


def write_rgb(path: str | Path, img: np.ndarray) -> None:
    check_rgb(img)
    Image.fromarray(img).save(path)
