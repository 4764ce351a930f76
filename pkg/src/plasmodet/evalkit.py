"""Detection-vs-ground-truth matching and PPV / sensitivity.

True negatives do not exist in this setting (there is no finite set of
"non-parasite boxes"), so :class:`ConfusionCounts` carries no ``tn``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "UndefinedMetricError",
    "ConfusionCounts",
    "MatchResult",
    "match_boxes",
    "ppv",
    "sensitivity",
    "metrics_report",
]


class UndefinedMetricError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError(f"counts must be non-negative: {self}")

    @property
    def tn(self) -> None:
        return None

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn}


@dataclass
class MatchResult:
    counts: ConfusionCounts
    detection_matched: list[bool] = field(default_factory=list)
    gt_matched: list[bool] = field(default_factory=list)


def _center(box):
    x, y, w, h = box
    return x + w / 2.0, y + h / 2.0


def _contains(box, pt):
    x, y, w, h = box
    return x <= pt[0] <= x + w and y <= pt[1] <= y + h


def match_boxes(detections: Sequence[tuple], ground_truth: Sequence[tuple]) -> MatchResult:
    """Greedy one-to-one matching by centre containment.

    ``detections`` are ``(box, confidence)`` pairs, ``ground_truth`` boxes;
    boxes are ``(x, y, w, h)``. Detections are visited by descending
    confidence and take the unmatched ground-truth box, among those holding
    the detection's centre, whose own centre is nearest.
    """
    order = sorted(range(len(detections)), key=lambda i: -float(detections[i][1]))
    det_hit = [False] * len(detections)
    gt_hit = [False] * len(ground_truth)
    for i in order:
        c = _center(detections[i][0])
        best, best_d = None, None
        for j, gt in enumerate(ground_truth):
            if gt_hit[j] or not _contains(gt, c):
                continue
            gc = _center(gt)
            d = (gc[0] - c[0]) ** 2 + (gc[1] - c[1]) ** 2
            if best is None or d < best_d:
                best, best_d = j, d
        if best is not None:
            gt_hit[best] = True
            det_hit[i] = True
    tp = sum(det_hit)
    counts = ConfusionCounts(tp, len(detections) - tp, len(ground_truth) - tp)
    return MatchResult(counts, det_hit, gt_hit)


def ppv(c: ConfusionCounts) -> float:
    """Positive predictive value in percent."""
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("PPV undefined without detections (tp + fp = 0)")
    return 100.0 * c.tp / (c.tp + c.fp)


def sensitivity(c: ConfusionCounts) -> float:
    """Sensitivity (recall) in percent."""
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("sensitivity undefined without ground truth (tp + fn = 0)")
    return 100.0 * c.tp / (c.tp + c.fn)


def _maybe(metric, c):
    try:
        return metric(c)
    except UndefinedMetricError:
        return None


def metrics_report(per_image: Iterable[tuple[str, ConfusionCounts]]) -> dict:
    """The metrics JSON document; undefined metrics become ``None``."""
    rows, total = [], ConfusionCounts()
    for image_id, c in per_image:
        total = total + c
        rows.append({"image": image_id, **c.as_dict(), "ppv": _maybe(ppv, c), "sensitivity": _maybe(sensitivity, c)})
    return {
        "per_image": rows,
        "aggregate": {**total.as_dict(), "ppv": _maybe(ppv, total), "sensitivity": _maybe(sensitivity, total)},
    }
