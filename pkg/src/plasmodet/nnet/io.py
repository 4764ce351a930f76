"""Binary weight files.

Layout, all little-endian::

    magic    8 bytes  b"PLSMCNN\\0"
    version  u16
    count    u16      number of tensors
    shapes   count x (ndim u8, dims u32 * ndim)
    data     float32 tensors in shape-table order
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .model import DEFAULT_ARCH, PARAM_NAMES, Architecture, ModelParams

__all__ = ["MAGIC", "FORMAT_VERSION", "CorruptModelError", "save_params", "load_params"]

MAGIC = b"PLSMCNN\0"
FORMAT_VERSION = 1


class CorruptModelError(ValueError):
    """The weight file is truncated, mislabelled or has the wrong shapes."""


def save_params(path: str | Path, params: ModelParams) -> None:
    arrays = [np.ascontiguousarray(getattr(params, n), dtype="<f4") for n in PARAM_NAMES]
    parts = [MAGIC, struct.pack("<HH", FORMAT_VERSION, len(arrays))]
    for a in arrays:
        parts.append(struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
    parts.extend(a.tobytes() for a in arrays)
    Path(path).write_bytes(b"".join(parts))


def load_params(path: str | Path, arch: Architecture = DEFAULT_ARCH) -> ModelParams:
    """Read a weight file and check it against ``arch``."""
    buf = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise CorruptModelError(f"{path}: truncated at byte {pos} (needed {n} more)")
        chunk = buf[pos : pos + n]
        pos += n
        return chunk

    if take(len(MAGIC)) != MAGIC:
        raise CorruptModelError(f"{path}: bad magic, not a weight file")
    version, count = struct.unpack("<HH", take(4))
    if version != FORMAT_VERSION:
        raise CorruptModelError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    expected = arch.shapes()
    if count != len(PARAM_NAMES):
        raise CorruptModelError(f"{path}: {count} tensors, expected {len(PARAM_NAMES)}")
    shapes = []
    for name in PARAM_NAMES:
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        if shape != expected[name]:
            raise CorruptModelError(f"{path}: {name} has shape {shape}, expected {expected[name]}")
        shapes.append(shape)
    arrays = {}
    for name, shape in zip(PARAM_NAMES, shapes):
        n = int(np.prod(shape))
        arrays[name] = np.frombuffer(take(4 * n), dtype="<f4").reshape(shape).astype(np.float32)
    if pos != len(buf):
        raise CorruptModelError(f"{path}: {len(buf) - pos} trailing bytes")
    return ModelParams(**arrays, arch=arch)
