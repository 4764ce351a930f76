"""Plasmodium detection in uncropped thin blood smear images.

Blob proposals from a multi-scale Laplacian of Gaussian on the saturation
channel, a small CNN patch classifier, and GLCM texture clustering to drop
false positives.
"""
from .cluster import FilterConfig
from .pipeline import DetectConfig, Detection, DetectionResult, detect
from .roi import RoiConfig, propose_rois

__version__ = "0.1.0"

__all__ = [
    "FilterConfig",
    "DetectConfig",
    "Detection",
    "DetectionResult",
    "detect",
    "RoiConfig",
    "propose_rois",
]
