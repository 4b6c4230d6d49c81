"""Average-magnitude pixel maps as CSV and 8-bit binary PGM."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_map_csv(grid, path) -> None:
    grid = np.asarray(grid, dtype=np.float64)
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in grid:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_map_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def to_gray(grid) -> np.ndarray:
    """Min-max scale to 0..255; a constant map becomes all zeros."""
    grid = np.asarray(grid, dtype=np.float64)
    lo, hi = grid.min(), grid.max()
    if hi == lo:
        return np.zeros(grid.shape, dtype=np.uint8)
    return np.rint((grid - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_map_pgm(grid, path) -> None:
    gray = to_gray(grid)
    rows, cols = gray.shape
    Path(path).write_bytes(f"P5\n{cols} {rows}\n255\n".encode("ascii") + gray.tobytes())
