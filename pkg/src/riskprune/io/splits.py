from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DatasetSplit:
    """Train / calibration / validation partition.

    ``calibration_idx`` and ``validation_idx`` index into the pool the split
    was drawn from (the MNIST test file by default).
    """

    X_train: np.ndarray
    y_train: np.ndarray
    X_cal: np.ndarray
    y_cal: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    calibration_idx: np.ndarray
    validation_idx: np.ndarray
    seed: int
    source: str = "calibration and validation drawn from the held-out pool by seeded shuffle"

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.X_train), len(self.X_cal), len(self.X_val)


def split_dataset(X_train, y_train, X_pool, y_pool, n_cal: int = 9000, n_val: int = 1000,
                  seed: int = 0) -> DatasetSplit:
    """Keep the training set as is and shuffle the pool into disjoint calibration/validation sets."""
    X_pool = np.asarray(X_pool)
    y_pool = np.asarray(y_pool)
    if n_cal + n_val > len(X_pool):
        raise ValueError(f"pool has {len(X_pool)} samples, need {n_cal + n_val}")
    perm = np.random.default_rng(seed).permutation(len(X_pool))
    cal, val = perm[:n_cal], perm[n_cal:n_cal + n_val]
    return DatasetSplit(np.asarray(X_train), np.asarray(y_train), X_pool[cal], y_pool[cal],
                        X_pool[val], y_pool[val], cal, val, seed)


def three_way_split(X, y, n_train: int, n_cal: int, n_val: int, seed: int = 0) -> DatasetSplit:
    """Disjoint train/calibration/validation sets from a single pool."""
    X = np.asarray(X)
    y = np.asarray(y)
    if n_train + n_cal + n_val > len(X):
        raise ValueError(f"pool has {len(X)} samples, need {n_train + n_cal + n_val}")
    perm = np.random.default_rng(seed).permutation(len(X))
    tr = perm[:n_train]
    cal = perm[n_train:n_train + n_cal]
    val = perm[n_train + n_cal:n_train + n_cal + n_val]
    return DatasetSplit(X[tr], y[tr], X[cal], y[cal], X[val], y[val], cal, val, seed,
                        source="single pool split by seeded shuffle")
