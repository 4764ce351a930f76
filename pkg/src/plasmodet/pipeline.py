"""Whole-image detection: proposals, CNN scoring, texture filtering."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .cluster import FeaturePoint, FilterConfig, FilterReport, filter_false_positives
from .imaging import crop, resize
from .nnet.model import ModelParams, predict_proba
from .nnet.train import to_batch
from .roi import RoiCandidate, RoiConfig, propose_rois
from .texture import TextureFeatures, roi_features

__all__ = ["DetectConfig", "Detection", "DetectionResult", "classify_candidates", "detect"]

log = logging.getLogger(__name__)

PLASMODIUM = 1


@dataclass
class DetectConfig:
    roi: RoiConfig = field(default_factory=RoiConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    threshold: float = 0.5
    use_glcm_filter: bool = True

    def __post_init__(self):
        if not 0 <= self.threshold <= 1:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")


@dataclass
class Detection:
    box: tuple[int, int, int, int]
    center: tuple[int, int]
    confidence: float
    texture: TextureFeatures
    kept_by_filter: bool = True

    def as_dict(self) -> dict:
        x, y, w, h = self.box
        return {
            "box": {"x": x, "y": y, "w": w, "h": h},
            "confidence": self.confidence,
            "glcm": self.texture.as_dict(),
            "kept_by_filter": self.kept_by_filter,
        }


@dataclass
class DetectionResult:
    detections: list[Detection]
    report: FilterReport | None
    n_candidates: int

    @property
    def kept(self) -> list[Detection]:
        return [d for d in self.detections if d.kept_by_filter]


def classify_candidates(img: np.ndarray, cands: list[RoiCandidate], params: ModelParams) -> np.ndarray:
    """Plasmodium probability for each candidate box."""
    if not cands:
        return np.zeros(0)
    size = params.arch.input_size
    patches = np.stack([resize(crop(img, c.box), size, size) for c in cands])
    return predict_proba(params, to_batch(patches))[:, PLASMODIUM].astype(np.float64)


def _group_by_center(cands):
    groups: dict[tuple[int, int], list[int]] = {}
    for i, c in enumerate(cands):
        groups.setdefault((c.center_x, c.center_y), []).append(i)
    return groups


def detect(img: np.ndarray, params: ModelParams, cfg: DetectConfig | None = None) -> DetectionResult:
    """Detect parasites in one RGB smear image.

    Every centroid is scored at all configured box sizes. It becomes a
    detection when its best size reaches ``cfg.threshold``; the detection
    carries that box. Texture is read from the smallest box at the
    centroid, so features of different detections cover comparable areas.
    """
    cfg = cfg or DetectConfig()
    t0 = time.perf_counter()
    cands = propose_rois(img, cfg.roi)
    probs = classify_candidates(img, cands, params)
    detections = []
    for (cx, cy), idx in _group_by_center(cands).items():
        by_size = sorted(idx, key=lambda i: (cands[i].box[2] * cands[i].box[3], i))
        best = max(by_size, key=lambda i: probs[i])  # first max = smallest box on ties
        if probs[best] < cfg.threshold:
            continue
        tex = roi_features(img, cands[by_size[0]].box)
        detections.append(Detection(cands[best].box, (cx, cy), float(probs[best]), tex))

    report = None
    if cfg.use_glcm_filter:
        points = [FeaturePoint(d.texture.homogeneity, d.texture.energy, i) for i, d in enumerate(detections)]
        kept, report = filter_false_positives(points, cfg.filter)
        kept_ids = {p.roi_id for p in kept}
        for i, d in enumerate(detections):
            d.kept_by_filter = i in kept_ids
    log.debug(
        "%d candidates, %d CNN-positive, %d kept in %.2fs",
        len(cands),
        len(detections),
        sum(d.kept_by_filter for d in detections),
        time.perf_counter() - t0,
    )
    return DetectionResult(detections, report, len(cands))
