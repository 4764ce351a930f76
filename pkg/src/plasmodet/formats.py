"""JSON file formats: ground-truth annotations and detection records.

Annotation file::

    {"image": "smear_000.png", "width": 1280, "height": 960,
     "boxes": [{"x": 10, "y": 20, "w": 25, "h": 25}, ...],
     "class_hint": "plasmodium"}

``width``/``height`` and ``class_hint`` are optional; without the size the
image next to the annotation is opened to validate the boxes. Synthetic
annotations may also list ``distractors`` boxes, which are ignored here.
"""
from __future__ import annotations

import json
from pathlib import Path

from PIL import Image

from .pipeline import DetectionResult

__all__ = [
    "FormatError",
    "image_id",
    "load_annotation",
    "load_annotations",
    "write_json",
    "detection_record",
    "load_detection_records",
]

_ANNOTATION_KEYS = {"image", "width", "height", "boxes", "class_hint", "distractors"}


class FormatError(ValueError):
    pass


def image_id(path: str | Path) -> str:
    return Path(path).name


def _box(d, where):
    try:
        box = tuple(int(d[k]) for k in ("x", "y", "w", "h"))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: box needs integer x, y, w, h: {d!r}") from exc
    if box[2] < 1 or box[3] < 1 or box[0] < 0 or box[1] < 0:
        raise FormatError(f"{where}: invalid box {d!r}")
    return box


def load_annotation(path: str | Path) -> dict:
    """Parse and validate one annotation file.

    Returns ``{"image": id, "boxes": [(x, y, w, h), ...], "class_hint": ...}``.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "image" not in doc or "boxes" not in doc:
        raise FormatError(f"{path}: annotation needs 'image' and 'boxes'")
    extra = set(doc) - _ANNOTATION_KEYS
    if extra:
        raise FormatError(f"{path}: unknown annotation keys {sorted(extra)}")
    boxes = [_box(b, path) for b in doc["boxes"]]
    size = None
    if "width" in doc and "height" in doc:
        size = (int(doc["width"]), int(doc["height"]))
    else:
        img_path = path.parent / doc["image"]
        if img_path.exists():
            with Image.open(img_path) as im:
                size = im.size
    if size is not None:
        for b in boxes:
            if b[0] + b[2] > size[0] or b[1] + b[3] > size[1]:
                raise FormatError(f"{path}: box {b} exceeds image size {size}")
    return {"image": image_id(doc["image"]), "boxes": boxes, "class_hint": doc.get("class_hint")}


def load_annotations(paths) -> dict[str, dict]:
    """Annotation files or directories of ``*.json`` files, keyed by image id."""
    out = {}
    for p in paths:
        p = Path(p)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        for f in files:
            ann = load_annotation(f)
            if ann["image"] in out:
                raise FormatError(f"{f}: duplicate annotation for {ann['image']}")
            out[ann["image"]] = ann
    return out


def write_json(path: str | Path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def detection_record(image: str, result: DetectionResult) -> dict:
    report = result.report.as_dict() if result.report is not None else None
    return {
        "image": image_id(image),
        "detections": [d.as_dict() for d in result.detections],
        "filter_report": report,
    }


def load_detection_records(path: str | Path) -> dict[str, dict]:
    doc = json.loads(Path(path).read_text())
    records = doc if isinstance(doc, list) else [doc]
    out = {}
    for rec in records:
        if not isinstance(rec, dict) or "image" not in rec or "detections" not in rec:
            raise FormatError(f"{path}: detection record needs 'image' and 'detections'")
        for d in rec["detections"]:
            if not 0 <= float(d["confidence"]) <= 1:
                raise FormatError(f"{path}: confidence out of [0, 1]: {d['confidence']}")
        out[image_id(rec["image"])] = rec
    return out
