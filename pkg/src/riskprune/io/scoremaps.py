"""Per-pixel segmentation score maps.

One file per model variant::

    b"SMAP", u8 version, u32 M, u32 N, u32 count, u16 tag length, UTF-8 tag,
    count * M * N little-endian f32 scores (image-major, then row-major)

The tag is ``"full"`` for the dense model or the pruning ratio (e.g. ``"0.1"``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SMAP"
VERSION = 1
SUFFIX = ".smap"
_HEAD = struct.Struct("<BIIIH")


@dataclass
class ScoreMapSet:
    full: np.ndarray  # (count, M, N)
    pruned: dict[float, np.ndarray] = field(default_factory=dict)

    @property
    def ratios(self) -> list[float]:
        return sorted(self.pruned)

    @property
    def shape(self) -> tuple[int, int]:
        return self.full.shape[1:]

    def __len__(self):
        return self.full.shape[0]


def write_scoremap(path, tag, maps) -> None:
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim == 2:
        maps = maps[None]
    if maps.ndim != 3:
        raise ValueError("score maps must have shape (count, M, N)")
    _check_range(maps, path)
    tag_bytes = str(tag).encode("utf-8")
    count, m, n = maps.shape
    Path(path).write_bytes(MAGIC + _HEAD.pack(VERSION, m, n, count, len(tag_bytes)) + tag_bytes
                           + maps.astype("<f4").tobytes())


def _check_range(maps: np.ndarray, path) -> None:
    bad = ~((maps >= 0.0) & (maps <= 1.0))
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise FormatError(f"{path}: score {maps[idx]} at (image, row, col) {idx} is outside [0, 1]")


def read_scoremap_file(path) -> tuple[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: not a score-map file")
    if len(data) < 4 + _HEAD.size:
        raise FormatError(f"{path}: truncated header")
    version, m, n, count, tag_len = _HEAD.unpack(data[4:4 + _HEAD.size])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    offset = 4 + _HEAD.size
    tag = data[offset:offset + tag_len].decode("utf-8")
    offset += tag_len
    if len(data) - offset != count * m * n * 4:
        raise FormatError(f"{path}: payload size does not match {count} maps of {m}x{n}")
    maps = np.frombuffer(data, dtype="<f4", offset=offset).reshape(count, m, n).astype(np.float64)
    _check_range(maps, path)
    return tag, maps


def read_scoremaps(path) -> ScoreMapSet:
    """Load every ``*.smap`` file in a directory into one set keyed by tag."""
    path = Path(path)
    files = sorted(path.glob(f"*{SUFFIX}")) if path.is_dir() else [path]
    if not files:
        raise FormatError(f"{path}: no {SUFFIX} files found")
    full = None
    pruned: dict[float, np.ndarray] = {}
    for f in files:
        tag, maps = read_scoremap_file(f)
        if tag == "full":
            if full is not None:
                raise FormatError(f"{f}: duplicate 'full' tag")
            full = maps
            continue
        try:
            ratio = float(tag)
        except ValueError:
            raise FormatError(f"{f}: tag {tag!r} is neither 'full' nor a pruning ratio") from None
        if ratio in pruned:
            raise FormatError(f"{f}: duplicate tag {tag!r}")
        pruned[ratio] = maps
    if full is None:
        raise FormatError(f"{path}: no score maps tagged 'full'")
    for ratio, maps in pruned.items():
        if maps.shape != full.shape:
            raise FormatError(
                f"{path}: maps for ratio {ratio} have shape {maps.shape}, 'full' has {full.shape}"
            )
    return ScoreMapSet(full, pruned)
