"""MNIST IDX files (big-endian header, unsigned byte payload).

Gzipped files are detected by their magic bytes and read transparently.
"""

from __future__ import annotations

import gzip
import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import FormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
_MAX_ITEMS = 2**31 - 1


def _read_bytes(path) -> bytes:
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _header(data: bytes, magic: int, n_dims: int, path) -> tuple[int, ...]:
    size = 4 + 4 * n_dims
    if len(data) < size:
        raise FormatError(f"{path}: truncated IDX header")
    found, *dims = struct.unpack(f">I{n_dims}I", data[:size])
    if found != magic:
        raise FormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    total = 1
    for d in dims:
        total *= d
    if total > _MAX_ITEMS:
        raise FormatError(f"{path}: header dimensions {dims} overflow")
    if len(data) - size < total:
        raise FormatError(f"{path}: payload has {len(data) - size} bytes, header promises {total}")
    return tuple(dims)


def read_idx_images(path, return_shape: bool = False):
    """Images as float64 rows scaled to [0, 1], shape ``(count, rows * cols)``."""
    data = _read_bytes(path)
    count, rows, cols = _header(data, IMAGE_MAGIC, 3, path)
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    images = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    return (images, (rows, cols)) if return_shape else images


def read_idx_labels(path, n_classes: int | None = None) -> np.ndarray:
    """Labels as int64.  Values ``>= n_classes`` are kept but trigger a warning."""
    data = _read_bytes(path)
    (count,) = _header(data, LABEL_MAGIC, 1, path)
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(np.int64)
    if n_classes is not None and labels.size and labels.max() >= n_classes:
        bad = int(np.argmax(labels >= n_classes))
        warnings.warn(f"{path}: label {labels[bad]} at index {bad} is outside 0..{n_classes - 1}",
                      stacklevel=2)
    return labels


def pair_samples(images: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels")
    return images, labels


def _write(path, payload: bytes):
    path = Path(path)
    if path.suffix == ".gz":
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)


def write_idx_images(path, images) -> None:
    """Write a uint8 array ``(count, rows, cols)``."""
    images = np.asarray(images)
    if images.ndim != 3 or images.dtype != np.uint8:
        raise ValueError("images must be a uint8 array of shape (count, rows, cols)")
    _write(path, struct.pack(">IIII", IMAGE_MAGIC, *images.shape) + images.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ValueError("labels must be a 1-D array of values in 0..255")
    _write(path, struct.pack(">II", LABEL_MAGIC, labels.size) + labels.astype(np.uint8).tobytes())
