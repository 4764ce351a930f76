"""The two-conv, two-dense classifier and its Adam training step.

Layer order::

    conv1 -> relu -> pool -> conv2 -> relu -> pool -> flatten -> dropout
    -> fc1 -> relu -> dropout -> fc2 -> softmax

With the default 100x100x3 input the spatial sizes run 100 -> 96 -> 48 ->
44 -> 22, so fc1 sees 22*22*32 = 15488 features.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import layers as L

__all__ = [
    "Architecture",
    "DEFAULT_ARCH",
    "ModelParams",
    "TrainingAborted",
    "Adam",
    "init_params",
    "forward",
    "forward_batch",
    "backward",
    "backward_and_step",
    "train_step",
    "predict_proba",
]

PARAM_NAMES = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b")


class TrainingAborted(RuntimeError):
    """Raised when the loss stops being a finite number."""


@dataclass(frozen=True)
class Architecture:
    input_size: int = 100
    in_channels: int = 3
    conv1_filters: int = 16
    conv2_filters: int = 32
    kernel: int = 5
    hidden: int = 100
    classes: int = 2

    def spatial_sizes(self) -> list[int]:
        s = [self.input_size]
        s.append(s[-1] - self.kernel + 1)
        s.append(s[-1] // 2)
        s.append(s[-1] - self.kernel + 1)
        s.append(s[-1] // 2)
        if min(s) < 1:
            raise ValueError(f"input {self.input_size} too small for this architecture: {s}")
        return s

    @property
    def flat_size(self) -> int:
        return self.spatial_sizes()[-1] ** 2 * self.conv2_filters

    def shapes(self) -> dict[str, tuple[int, ...]]:
        k, c = self.kernel, self.in_channels
        f1, f2, hid = self.conv1_filters, self.conv2_filters, self.hidden
        return {
            "conv1_w": (f1, k, k, c),
            "conv1_b": (f1,),
            "conv2_w": (f2, k, k, f1),
            "conv2_b": (f2,),
            "fc1_w": (self.flat_size, hid),
            "fc1_b": (hid,),
            "fc2_w": (hid, self.classes),
            "fc2_b": (self.classes,),
        }


DEFAULT_ARCH = Architecture()
assert DEFAULT_ARCH.spatial_sizes() == [100, 96, 48, 44, 22]
assert DEFAULT_ARCH.flat_size == 15488


@dataclass
class ModelParams:
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray
    arch: Architecture = DEFAULT_ARCH

    def __post_init__(self):
        expected = self.arch.shapes()
        for name in PARAM_NAMES:
            got = getattr(self, name).shape
            if got != expected[name]:
                raise ValueError(f"{name} has shape {got}, expected {expected[name]}")

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.arrays().items()}, arch=self.arch)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(**{k: v.astype(dtype) for k, v in self.arrays().items()}, arch=self.arch)

    @property
    def count(self) -> int:
        return sum(v.size for v in self.arrays().values())

    @classmethod
    def zeros(cls, arch: Architecture = DEFAULT_ARCH, dtype=np.float32) -> "ModelParams":
        return cls(**{k: np.zeros(s, dtype=dtype) for k, s in arch.shapes().items()}, arch=arch)


def init_params(arch: Architecture = DEFAULT_ARCH, seed: int = 0, dtype=np.float32) -> ModelParams:
    """He-normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    out = {}
    for name, shape in arch.shapes().items():
        if name.endswith("_b"):
            out[name] = np.zeros(shape, dtype=dtype)
            continue
        fan_in = shape[0] if name.startswith("fc") else math.prod(shape[1:])
        out[name] = (rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)).astype(dtype)
    return ModelParams(**out, arch=arch)


def forward_batch(params: ModelParams, x: np.ndarray, training: bool = False, rng=None, dropout_p: float = 0.5):
    """Run a batch ``(N, H, W, C)``; returns ``(probs (N, classes), cache)``.

    ``cache`` holds every layer's activation under its layer name plus what
    :func:`backward` needs.
    """
    a = params.arch
    if x.ndim != 4 or x.shape[1:] != (a.input_size, a.input_size, a.in_channels):
        raise ValueError(
            f"expected input (N, {a.input_size}, {a.input_size}, {a.in_channels}), got {x.shape}"
        )
    if training and rng is None:
        raise ValueError("training mode needs an rng for dropout")
    x = x.astype(params.conv1_w.dtype, copy=False)
    c = {}
    h, c["conv1_cache"] = L.conv2d_forward(x, params.conv1_w, params.conv1_b)
    c["conv1"], c["relu1_mask"] = L.relu_forward(h)
    c["pool1"], c["pool1_cache"] = L.maxpool2x2_forward(c["conv1"])
    h, c["conv2_cache"] = L.conv2d_forward(c["pool1"], params.conv2_w, params.conv2_b)
    c["conv2"], c["relu2_mask"] = L.relu_forward(h)
    c["pool2"], c["pool2_cache"] = L.maxpool2x2_forward(c["conv2"])
    flat = c["pool2"].reshape(len(x), -1)
    h, c["drop1_mask"] = L.dropout_forward(flat, dropout_p, training, rng)
    h, c["fc1_cache"] = L.dense_forward(h, params.fc1_w, params.fc1_b)
    c["fc1"], c["relu3_mask"] = L.relu_forward(h)
    h, c["drop2_mask"] = L.dropout_forward(c["fc1"], dropout_p, training, rng)
    c["logits"], c["fc2_cache"] = L.dense_forward(h, params.fc2_w, params.fc2_b)
    probs = L.softmax(c["logits"])
    return probs, c


def forward(params: ModelParams, x: np.ndarray, training: bool = False, rng=None, dropout_p: float = 0.5):
    """Single image ``(H, W, C)`` in [0, 1]; returns ``(probs, activations)``."""
    if x.ndim != 3:
        raise ValueError(f"expected a single (H, W, C) image, got shape {x.shape}")
    probs, cache = forward_batch(params, x[None], training, rng, dropout_p)
    acts = {k: cache[k][0] for k in ("conv1", "pool1", "conv2", "pool2", "fc1", "logits")}
    return probs[0], acts


def predict_proba(params: ModelParams, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Inference over ``(N, H, W, C)`` in chunks, dropout off."""
    out = [forward_batch(params, x[i : i + batch_size])[0] for i in range(0, len(x), batch_size)]
    if not out:
        return np.zeros((0, params.arch.classes), dtype=params.conv1_w.dtype)
    return np.concatenate(out)


def backward(params: ModelParams, probs: np.ndarray, cache: dict, onehot: np.ndarray) -> dict:
    """Gradients of the mean cross-entropy w.r.t. every parameter."""
    n = len(probs)
    g = {}
    d = (probs - onehot.astype(probs.dtype)) / probs.dtype.type(n)
    d, g["fc2_w"], g["fc2_b"] = L.dense_backward(d, cache["fc2_cache"])
    d = L.dropout_backward(d, cache["drop2_mask"])
    d = L.relu_backward(d, cache["relu3_mask"])
    d, g["fc1_w"], g["fc1_b"] = L.dense_backward(d, cache["fc1_cache"])
    d = L.dropout_backward(d, cache["drop1_mask"])
    d = d.reshape(cache["pool2"].shape)
    d = L.maxpool2x2_backward(d, cache["pool2_cache"])
    d = L.relu_backward(d, cache["relu2_mask"])
    d, g["conv2_w"], g["conv2_b"] = L.conv2d_backward(d, cache["conv2_cache"])
    d = L.maxpool2x2_backward(d, cache["pool1_cache"])
    d = L.relu_backward(d, cache["relu1_mask"])
    _, g["conv1_w"], g["conv1_b"] = L.conv2d_backward(d, cache["conv1_cache"], need_dx=False)
    return g


class Adam:
    def __init__(self, params: ModelParams, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.arrays().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays().items()}

    def step(self, params: ModelParams, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1 - b1**self.t
        corr2 = 1 - b2**self.t
        for name, p in params.arrays().items():
            gr = grads[name]
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * gr
            v *= b2
            v += (1 - b2) * gr * gr
            p -= (self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)).astype(p.dtype)


def backward_and_step(params: ModelParams, opt: Adam, x: np.ndarray, onehot: np.ndarray, rng, dropout_p: float = 0.5):
    """One training step in place; returns ``(params, batch loss)``."""
    loss, _ = train_step(params, opt, x, onehot, rng, dropout_p)
    return params, loss


def train_step(params: ModelParams, opt: Adam, x: np.ndarray, onehot: np.ndarray, rng, dropout_p: float = 0.5):
    """Like :func:`backward_and_step` but returns ``(loss, pre-step probs)``."""
    if len(x) == 0:
        raise ValueError("empty batch")
    probs, cache = forward_batch(params, x, True, rng, dropout_p)
    loss = L.cross_entropy(probs, onehot)
    if not math.isfinite(loss):
        logits = cache["logits"]
        finite = logits[np.isfinite(logits)]
        peak = float(np.abs(finite).max()) if finite.size else float("nan")
        raise TrainingAborted(
            f"non-finite loss {loss} at step {opt.t + 1}; "
            f"{logits.size - finite.size} non-finite logits, max finite |logit| {peak:.3g}"
        )
    opt.step(params, backward(params, probs, cache, onehot))
    return loss, probs
