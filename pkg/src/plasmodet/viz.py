"""Rendering helpers: box overlays and activation-map grids."""
from __future__ import annotations

import math

import numpy as np

__all__ = ["KEPT_COLOR", "FILTERED_COLOR", "draw_boxes", "activation_grid"]

KEPT_COLOR = (0, 200, 0)
FILTERED_COLOR = (0, 80, 255)


def draw_boxes(img: np.ndarray, boxes, color, thickness: int = 2) -> np.ndarray:
    """Copy of ``img`` with rectangle outlines for ``(x, y, w, h)`` boxes."""
    out = img.copy()
    h, w = out.shape[:2]
    t = thickness
    for x, y, bw, bh in boxes:
        x0, y0 = max(x, 0), max(y, 0)
        x1, y1 = min(x + bw, w), min(y + bh, h)
        out[y0 : min(y0 + t, y1), x0:x1] = color
        out[max(y1 - t, y0) : y1, x0:x1] = color
        out[y0:y1, x0 : min(x0 + t, x1)] = color
        out[y0:y1, max(x1 - t, x0) : x1] = color
    return out


def activation_grid(maps: np.ndarray, cols: int | None = None, gap: int = 2) -> np.ndarray:
    """Tile ``(H, W, F)`` feature maps into one gray RGB image.

    Each map is min-max scaled on its own; a constant map renders mid-gray.
    """
    h, w, f = maps.shape
    cols = cols or int(math.ceil(math.sqrt(f)))
    rows = int(math.ceil(f / cols))
    grid = np.full((rows * (h + gap) + gap, cols * (w + gap) + gap), 255, dtype=np.uint8)
    for i in range(f):
        m = maps[..., i].astype(np.float64)
        lo, hi = m.min(), m.max()
        tile = np.full((h, w), 128.0) if hi <= lo else (m - lo) * (255.0 / (hi - lo))
        r, c = divmod(i, cols)
        y, x = gap + r * (h + gap), gap + c * (w + gap)
        grid[y : y + h, x : x + w] = np.rint(tile).astype(np.uint8)
    return np.repeat(grid[..., None], 3, axis=2)
