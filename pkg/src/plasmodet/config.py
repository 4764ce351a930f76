"""Run configuration: one flat ``key = value`` file covering every stage.

Example::

    # proposal
    sigmas = 4, 5, 6, 7
    box_sizes = 40, 60, 80
    # filter
    silhouette_min = 0.5
    seed = 7

Lists are comma separated; ``#`` starts a comment. Unknown keys are an
error. Command-line flags override file values.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .cluster import FilterConfig
from .nnet.augment import AugmentConfig
from .nnet.train import TrainConfig
from .roi import RoiConfig

__all__ = ["ConfigError", "RunConfig", "parse_config_text", "load_config"]


class ConfigError(ValueError):
    pass


def _floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _zoom(s):
    vals = _floats(s)
    if len(vals) != 2:
        raise ValueError("zoom_range needs two values")
    return tuple(vals)


# key -> (section, parser)
_KEYS = {
    "sigmas": ("roi", _floats),
    "box_sizes": ("roi", _ints),
    "min_component_area": ("roi", int),
    "merge_radius": ("roi", float),
    "opening_iterations": ("roi", int),
    "dilation_iterations": ("roi", int),
    "learning_rate": ("train", float),
    "batch_size": ("train", int),
    "epochs": ("train", int),
    "dropout_p": ("train", float),
    "validation_count": ("train", int),
    "max_translate_frac": ("augment", float),
    "max_rotate_deg": ("augment", float),
    "zoom_range": ("augment", _zoom),
    "target_per_class": ("augment", int),
    "silhouette_min": ("filter", float),
    "pairwise_distance_min": ("filter", float),
    "k_candidates": ("filter", _ints),
    "threshold": ("run", float),
    "use_glcm_filter": ("run", _bool),
    "seed": ("run", int),
}


@dataclass
class RunConfig:
    roi: RoiConfig = field(default_factory=RoiConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    threshold: float = 0.5
    use_glcm_filter: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.threshold <= 1:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")
        self.apply_seed(self.seed)

    def apply_seed(self, seed: int) -> None:
        self.seed = seed
        self.train.rng_seed = seed
        self.augment.rng_seed = seed
        self.filter.rng_seed = seed

    def updated(self, values: dict) -> "RunConfig":
        """Copy with ``values`` (already parsed, flat keys) applied and revalidated."""
        sections = {"roi": {}, "train": {}, "augment": {}, "filter": {}, "run": {}}
        for key, val in values.items():
            if key not in _KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            sections[_KEYS[key][0]][key] = val
        try:
            return RunConfig(
                roi=replace(self.roi, **sections["roi"]),
                train=replace(self.train, **sections["train"]),
                augment=replace(self.augment, **sections["augment"]),
                filter=replace(self.filter, **sections["filter"]),
                threshold=sections["run"].get("threshold", self.threshold),
                use_glcm_filter=sections["run"].get("use_glcm_filter", self.use_glcm_filter),
                seed=sections["run"].get("seed", self.seed),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = _KEYS[key][1](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config(path: str | Path | None, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    if path is None:
        return base
    return base.updated(parse_config_text(Path(path).read_text()))
