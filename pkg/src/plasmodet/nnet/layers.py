"""Forward and backward passes of the individual layers.

All tensors are batch-first and channels-last: ``(N, H, W, C)``. Every
backward function takes the upstream gradient and whatever its forward
pass cached, and returns gradients with the same dtype as the inputs.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    # (N*Ho*Wo, k*k*C), ordering (i, j, c) to match (F, k, k, C) kernels
    win = sliding_window_view(x, (k, k), axis=(1, 2)).transpose(0, 1, 2, 4, 5, 3)
    n, ho, wo = win.shape[:3]
    return win.reshape(n * ho * wo, -1)


def _kernel_matrix(kernels: np.ndarray) -> np.ndarray:
    return kernels.reshape(kernels.shape[0], -1).T


def conv2d_forward(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray):
    """Valid, stride-1 convolution (cross-correlation as in most frameworks).

    ``x`` is ``(N, H, W, C)``, ``kernels`` ``(F, k, k, C)``, ``bias`` ``(F,)``.
    Returns ``(out (N, H-k+1, W-k+1, F), cache)``.
    """
    if x.ndim != 4 or kernels.ndim != 4:
        raise ValueError("conv2d expects x (N,H,W,C) and kernels (F,k,k,C)")
    f, k, k2, c = kernels.shape
    if k != k2 or x.shape[3] != c or bias.shape != (f,):
        raise ValueError(f"shape mismatch: x {x.shape}, kernels {kernels.shape}, bias {bias.shape}")
    n, h, w, _ = x.shape
    if h < k or w < k:
        raise ValueError(f"input {h}x{w} smaller than kernel {k}x{k}")
    ho, wo = h - k + 1, w - k + 1
    cols = _im2col(x, k)
    out = cols @ _kernel_matrix(kernels) + bias
    return out.reshape(n, ho, wo, f), (x.shape, cols, kernels)


def conv2d_backward(dout: np.ndarray, cache, need_dx: bool = True):
    """Returns ``(dx or None, dkernels, dbias)``."""
    x_shape, cols, kernels = cache
    f, k, _, c = kernels.shape
    n, ho, wo, _ = dout.shape
    d2 = dout.reshape(-1, f)
    dw = (d2.T @ cols).reshape(f, k, k, c)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dw, db
    dcols = (d2 @ kernels.reshape(f, -1)).reshape(n, ho, wo, k, k, c)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, i : i + ho, j : j + wo, :] += dcols[:, :, :, i, j, :]
    return dx, dw, db


def maxpool2x2_forward(x: np.ndarray):
    """2x2 stride-2 max pool; an odd trailing row/column is dropped."""
    n, h, w, c = x.shape
    ho, wo = h // 2, w // 2
    if ho == 0 or wo == 0:
        raise ValueError(f"input {h}x{w} too small for 2x2 pooling")
    win = x[:, : 2 * ho, : 2 * wo, :].reshape(n, ho, 2, wo, 2, c)
    win = win.transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, 4)
    arg = win.argmax(axis=4)
    out = np.take_along_axis(win, arg[..., None], axis=4)[..., 0]
    return out, (x.shape, arg)


def maxpool2x2_backward(dout: np.ndarray, cache):
    x_shape, arg = cache
    n, h, w, c = x_shape
    ho, wo = dout.shape[1:3]
    win = np.zeros((n, ho, wo, c, 4), dtype=dout.dtype)
    np.put_along_axis(win, arg[..., None], dout[..., None], axis=4)
    win = win.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * ho, 2 * wo, c)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, : 2 * ho, : 2 * wo, :] = win
    return dx


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0), x > 0


def relu_backward(dout: np.ndarray, mask: np.ndarray):
    return dout * mask


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """``x @ w + b`` with ``w`` stored ``(in, out)``."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ValueError(f"shape mismatch: x {x.shape}, w {w.shape}, b {b.shape}")
    return x @ w + b, (x, w)


def dense_backward(dout: np.ndarray, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def dropout_forward(x: np.ndarray, p: float, training: bool, rng: np.random.Generator | None):
    """Inverted dropout; the identity when not training or ``p == 0``."""
    if not 0 <= p < 1:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return x, None
    keep = rng.random(x.shape, dtype=np.float64) >= p
    scale = x.dtype.type(1.0 / (1.0 - p))
    mask = keep.astype(x.dtype) * scale
    return x * mask, mask


def dropout_backward(dout: np.ndarray, mask):
    return dout if mask is None else dout * mask


def cross_entropy(probs: np.ndarray, onehot: np.ndarray) -> float:
    """Mean categorical cross-entropy over the batch."""
    tiny = np.finfo(probs.dtype).tiny
    return float(-np.mean(np.sum(onehot * np.log(np.maximum(probs, tiny)), axis=1)))
