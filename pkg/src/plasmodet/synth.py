"""Seeded synthetic thin-smear scenes and classifier patches.

Scenes are pale pink fields with low-saturation red cells, small textured
high-saturation parasites (the ground truth) and, optionally, uniform-fill
high-saturation distractors that look like parasites in colour but not in
texture. Cells are drawn at the plasma's luma, so they show up in the
saturation channel but leave the luminance GLCM of a box to the objects
inside it.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .imaging import resize, write_rgb

__all__ = [
    "BACKGROUND",
    "synth_smear",
    "synth_patch",
    "synth_patch_corpus",
    "write_patch_corpus",
    "CLASS_DIRS",
]

BACKGROUND = (236, 222, 226)
# cells share the plasma's luma (227) and differ only in saturation
RBC = (248, 217, 223)
RBC_PALLOR = (242, 220, 225)
PARASITE = (150, 45, 145)
CHROMATIN = (85, 12, 95)
DISTRACTOR = (172, 62, 166)

SMEAR_SIZE = (1280, 960)
GT_PAD = 4
# class folder names, negative class first (label 0)
CLASS_DIRS = ("non_plasmodium", "plasmodium")


def _alpha_disk(shape, cx, cy, r):
    h, w = shape
    y0, y1 = max(int(cy - r - 2), 0), min(int(cy + r + 3), h)
    x0, x1 = max(int(cx - r - 2), 0), min(int(cx + r + 3), w)
    if y0 >= y1 or x0 >= x1:
        return None, None
    yy, xx = np.mgrid[y0:y1, x0:x1]
    d = np.hypot(xx - cx, yy - cy)
    return (slice(y0, y1), slice(x0, x1)), np.clip(r + 0.5 - d, 0.0, 1.0)


def _paint(canvas, cx, cy, r, color, texture=None):
    sl, a = _alpha_disk(canvas.shape[:2], cx, cy, r)
    if sl is None:
        return
    fill = np.broadcast_to(np.asarray(color, dtype=np.float64), a.shape + (3,))
    if texture is not None:
        fill = fill * texture(a.shape)[..., None]
    region = canvas[sl]
    canvas[sl] = region * (1 - a[..., None]) + fill * a[..., None]


def _draw_rbc(canvas, rng, cx, cy):
    r = rng.uniform(28, 38)
    _paint(canvas, cx, cy, r, RBC)
    _paint(canvas, cx + rng.uniform(-3, 3), cy + rng.uniform(-3, 3), r * 0.45, RBC_PALLOR)


def _draw_parasite(canvas, rng, cx, cy, r):
    # brightness speckle keeps saturation but breaks up luminance
    _paint(canvas, cx, cy, r, PARASITE, texture=lambda s: rng.uniform(0.35, 1.0, size=s))
    for _ in range(rng.integers(1, 4)):
        ang = rng.uniform(0, 2 * math.pi)
        rad = rng.uniform(0, r * 0.6)
        _paint(canvas, cx + rad * math.cos(ang), cy + rad * math.sin(ang), 2.0, CHROMATIN)


def _draw_distractor(canvas, rng, cx, cy, r):
    _paint(canvas, cx, cy, r, DISTRACTOR)


def _place(rng, n, width, height, margin, min_gap, taken):
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 20000:
            raise RuntimeError("could not place objects without overlap")
        x = rng.uniform(margin, width - margin)
        y = rng.uniform(margin, height - margin)
        if all(math.hypot(x - px, y - py) >= min_gap for px, py in taken + out):
            out.append((x, y))
    return out


def _to_bytes(canvas):
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def synth_smear(
    seed: int,
    n_parasites: int,
    n_distractors: int = 0,
    width: int = SMEAR_SIZE[0],
    height: int = SMEAR_SIZE[1],
    n_cells: int = 90,
    image_name: str = "synthetic.png",
):
    """Render one smear; returns ``(rgb, annotation)``.

    ``annotation`` follows the annotation-file schema. Distractor boxes are
    recorded under the optional ``"distractors"`` key so tests can tell
    false positives apart.
    """
    if n_parasites < 0 or n_distractors < 0:
        raise ValueError("object counts must be >= 0")
    rng = np.random.default_rng(seed)
    canvas = np.empty((height, width, 3), dtype=np.float64)
    canvas[:] = BACKGROUND
    for _ in range(n_cells):
        _draw_rbc(canvas, rng, rng.uniform(0, width), rng.uniform(0, height))

    sites = _place(rng, n_parasites + n_distractors, width, height, 60, 110, [])
    rng.shuffle(sites)
    boxes, distractors = [], []
    for i, (x, y) in enumerate(sites):
        r = rng.uniform(8, 9.5)
        if i < n_parasites:
            _draw_parasite(canvas, rng, x, y, r)
            target = boxes
        else:
            _draw_distractor(canvas, rng, x, y, r)
            target = distractors
        x0 = max(int(math.floor(x - r)) - GT_PAD, 0)
        y0 = max(int(math.floor(y - r)) - GT_PAD, 0)
        x1 = min(int(math.ceil(x + r)) + GT_PAD, width)
        y1 = min(int(math.ceil(y + r)) + GT_PAD, height)
        target.append({"x": x0, "y": y0, "w": x1 - x0, "h": y1 - y0})
    key = lambda b: (b["y"], b["x"])
    annotation = {
        "image": image_name,
        "width": width,
        "height": height,
        "boxes": sorted(boxes, key=key),
        "class_hint": "plasmodium",
        "distractors": sorted(distractors, key=key),
    }
    return _to_bytes(canvas), annotation


def synth_patch(rng: np.random.Generator, positive: bool, out_size: int = 100, side=None):
    """One classifier patch: a box-sized scene around a parasite or not.

    The scene is rendered at a proposal box size and resized to
    ``out_size`` square, the way detection crops are.
    """
    side = int(side or rng.choice([40, 60, 80]))
    canvas = np.empty((side, side, 3), dtype=np.float64)
    canvas[:] = BACKGROUND
    for _ in range(rng.integers(0, 4)):
        _draw_rbc(canvas, rng, rng.uniform(-20, side + 20), rng.uniform(-20, side + 20))
    c = side / 2
    if positive:
        j = side * 0.08
        _draw_parasite(canvas, rng, c + rng.uniform(-j, j), c + rng.uniform(-j, j), rng.uniform(8, 9.5))
    return resize(_to_bytes(canvas), out_size, out_size)


def synth_patch_corpus(seed: int, n_per_class: int, out_size: int = 100):
    """Balanced patch set; returns ``(uint8 images (n,h,w,3), labels (n,))``."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for i in range(2 * n_per_class):
        label = i % 2
        images.append(synth_patch(rng, bool(label), out_size))
        labels.append(label)
    return np.stack(images), np.asarray(labels, dtype=np.int64)


def write_patch_corpus(root: str | Path, seed: int, n_per_class: int) -> Path:
    root = Path(root)
    images, labels = synth_patch_corpus(seed, n_per_class)
    counters = [0, 0]
    for img, lab in zip(images, labels):
        d = root / CLASS_DIRS[lab]
        d.mkdir(parents=True, exist_ok=True)
        write_rgb(d / f"{counters[lab]:04d}.png", img)
        counters[lab] += 1
    return root
