"""K-Means on (homogeneity, energy) and the texture-based false-positive filter.

Parasite ROIs tend to form the cluster with the lowest homogeneity and
energy. The filter only trusts a clustering whose mean silhouette clears
``FilterConfig.silhouette_min``; otherwise every ROI is kept so that true
positives are not thrown away with the false ones.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

__all__ = [
    "FeaturePoint",
    "ClusterAssignment",
    "FilterConfig",
    "FilterReport",
    "InfeasibleClustering",
    "UndefinedSilhouette",
    "kmeans",
    "silhouette",
    "select_k",
    "filter_false_positives",
]

log = logging.getLogger(__name__)

MAX_ITER = 300


class InfeasibleClustering(ValueError):
    """Fewer distinct points than requested clusters."""


class UndefinedSilhouette(ValueError):
    """Silhouette needs at least two clusters and three points."""


@dataclass(frozen=True)
class FeaturePoint:
    homogeneity: float
    energy: float
    roi_id: Hashable = None

    def __post_init__(self):
        for v in (self.homogeneity, self.energy):
            if not (np.isfinite(v) and 0 < v <= 1):
                raise ValueError(f"feature coordinates must lie in (0, 1], got {v}")


@dataclass
class ClusterAssignment:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    mean_silhouette: float | None = None


@dataclass
class FilterConfig:
    silhouette_min: float = 0.50
    pairwise_distance_min: float = 0.06
    k_candidates: list[int] = field(default_factory=lambda: [2, 3])
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.silhouette_min < 1:
            raise ValueError(f"silhouette_min must be in (0, 1), got {self.silhouette_min}")
        if not self.pairwise_distance_min > 0:
            raise ValueError("pairwise_distance_min must be > 0")
        if not self.k_candidates or any(k < 2 for k in self.k_candidates):
            raise ValueError(f"k candidates must be >= 2: {self.k_candidates}")


@dataclass
class FilterReport:
    k: int | None
    silhouette: float | None
    kept: int
    dropped: int
    rule: str

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "silhouette": self.silhouette,
            "kept": self.kept,
            "dropped": self.dropped,
            "rule": self.rule,
        }


def _sqdist(points, centers):
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(x, k, rng):
    centers = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = _sqdist(x, np.asarray(centers)).min(axis=1)
        total = d2.sum()
        # distinct-point precondition guarantees total > 0 here
        idx = rng.choice(len(x), p=d2 / total)
        centers.append(x[idx])
    return np.asarray(centers, dtype=np.float64)


def _repair_empty(x, labels, centers, k):
    for c in range(k):
        if np.any(labels == c):
            continue
        d2 = ((x - centers[labels]) ** 2).sum(axis=1)
        sizes = np.bincount(labels, minlength=k)
        d2[sizes[labels] < 2] = -1.0
        far = int(np.argmax(d2))
        labels[far] = c
        centers[c] = x[far]
    return labels


def kmeans(points, k: int, seed: int = 0) -> ClusterAssignment:
    """Lloyd's algorithm with seeded k-means++ initialization."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("points must be a non-empty (n, d) array")
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(np.unique(x, axis=0)) < k:
        raise InfeasibleClustering(f"need {k} distinct points, have {len(np.unique(x, axis=0))}")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)
    labels = None
    prev = np.inf
    for _ in range(MAX_ITER):
        new = np.argmin(_sqdist(x, centers), axis=1)
        new = _repair_empty(x, new, centers, k)
        cost = float(((x - centers[new]) ** 2).sum())
        assert cost <= prev + 1e-12, "k-means inertia increased"
        prev = cost
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
        cost = float(((x - centers[labels]) ** 2).sum())
        assert cost <= prev + 1e-12, "k-means inertia increased"
        prev = cost
    inertia = float(((x - centers[labels]) ** 2).sum())
    return ClusterAssignment(k, labels, centers, inertia)


def silhouette(points, labels) -> float:
    """Mean silhouette, euclidean; singleton members score 0."""
    x = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    ids = np.unique(labels)
    if len(ids) < 2 or len(x) < 3:
        raise UndefinedSilhouette("silhouette needs >= 2 clusters and >= 3 points")
    d = np.sqrt(_sqdist(x, x))
    member = labels[None, :] == ids[:, None]  # (clusters, n)
    sizes = member.sum(axis=1)
    sums = d @ member.T  # (n, clusters)
    own = np.searchsorted(ids, labels)
    n = len(x)
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(n), own] / np.maximum(own_size - 1, 1), 0.0)
    mean_other = sums / sizes[None, :]
    mean_other[np.arange(n), own] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own_size == 1] = 0.0
    return float(s.mean())


def select_k(points, cfg: FilterConfig | None = None) -> ClusterAssignment:
    """Highest mean silhouette over ``cfg.k_candidates``; ties go to smaller k."""
    cfg = cfg or FilterConfig()
    x = np.asarray(points, dtype=np.float64)
    if len(x) < 3:
        raise InfeasibleClustering("need >= 3 points to select k")
    best = None
    for k in sorted(cfg.k_candidates):
        try:
            asg = kmeans(x, k, cfg.rng_seed)
        except InfeasibleClustering:
            continue
        if len(np.unique(asg.labels)) < 2:
            continue
        asg.mean_silhouette = silhouette(x, asg.labels)
        if best is None or asg.mean_silhouette > best.mean_silhouette:
            best = asg
    if best is None:
        raise InfeasibleClustering(f"no feasible k in {cfg.k_candidates}")
    return best


def filter_false_positives(points: Sequence[FeaturePoint], cfg: FilterConfig | None = None):
    """Return ``(kept points, FilterReport)``; kept points preserve input order."""
    cfg = cfg or FilterConfig()
    pts = list(points)
    n = len(pts)
    if n <= 1:
        return pts, FilterReport(None, None, n, 0, "too-few")
    x = np.array([[p.homogeneity, p.energy] for p in pts], dtype=np.float64)
    score = x.sum(axis=1)
    if n == 2:
        dist = float(np.linalg.norm(x[0] - x[1]))
        if dist > cfg.pairwise_distance_min:
            keep = int(np.argmin(score))
            return [pts[keep]], FilterReport(None, None, 1, 1, "pair-distance")
        return pts, FilterReport(None, None, 2, 0, "pair-close")
    try:
        asg = select_k(x, cfg)
    except InfeasibleClustering as exc:
        log.debug("clustering infeasible, keeping all: %s", exc)
        return pts, FilterReport(None, None, n, 0, "infeasible")
    sil = asg.mean_silhouette
    if sil < cfg.silhouette_min:
        return pts, FilterReport(asg.k, sil, n, 0, "low-silhouette")
    target = int(np.argmin(asg.centroids.sum(axis=1)))
    kept = [p for p, lab in zip(pts, asg.labels) if lab == target]
    return kept, FilterReport(asg.k, sil, len(kept), n - len(kept), "cluster")
