"""Per-sample losses and empirical risks.

All functions are vectorised: labels may be scalars or arrays and the result
has the broadcast shape.  Binary losses are returned as ``float64`` 0/1 values.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

BINARY_LOSSES = ("misclassify", "relaxed", "disagree")
BOUNDED_LOSSES = ("iou",)
LABEL_FREE_LOSSES = ("disagree", "iou")


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def loss_misclassify(y, yhat):
    return _out(np.not_equal(y, yhat).astype(np.float64))


def loss_relaxed(y, yhat_pruned, yhat_full):
    """1 exactly when the pruned model is wrong and the dense model is right."""
    pruned_wrong = np.not_equal(y, yhat_pruned).astype(np.float64)
    full_wrong = np.not_equal(y, yhat_full).astype(np.float64)
    return _out(np.maximum(pruned_wrong - full_wrong, 0.0))


def loss_disagree(yhat_full, yhat_pruned):
    return _out(np.not_equal(yhat_full, yhat_pruned).astype(np.float64))


def classification_losses(kind: str, y, yhat_pruned, yhat_full) -> np.ndarray:
    """Dispatch on a loss name.  ``y`` may be ``None`` for ``disagree``."""
    if kind == "misclassify":
        return np.asarray(loss_misclassify(y, yhat_pruned))
    if kind == "relaxed":
        return np.asarray(loss_relaxed(y, yhat_pruned, yhat_full))
    if kind == "disagree":
        return np.asarray(loss_disagree(yhat_full, yhat_pruned))
    raise ValueError(f"unknown classification loss {kind!r}")


class SelectiveRisk(NamedTuple):
    risk: float  # nan when nothing is kept
    n_kept: int
    n: int

    @property
    def defined(self) -> bool:
        return self.n_kept > 0

    @property
    def abstention(self) -> float:
        return abstention_fraction(self.n, self.n_kept)


def selective_risk(confidence, correct, threshold: float) -> SelectiveRisk:
    """Error rate over the samples whose confidence is strictly above ``threshold``."""
    confidence = np.asarray(confidence, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    kept = confidence > threshold
    n_kept = int(kept.sum())
    risk = float(np.mean(~correct[kept])) if n_kept else float("nan")
    return SelectiveRisk(risk, n_kept, int(confidence.size))


def abstention_fraction(n: int, n_kept: int) -> float:
    return (n - n_kept) / n


def mask_from_scores(scores, beta: float) -> np.ndarray:
    """Boolean mask of pixels with score >= 1 - beta.  Works on stacks of maps too."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    scores = np.asarray(scores, dtype=np.float64)
    return scores >= 1.0 - beta


def iou(a, b):
    """Intersection over union over the trailing two axes; 1 when both masks are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    axes = (-2, -1) if a.ndim >= 2 else None
    inter = np.logical_and(a, b).sum(axis=axes)
    union = np.logical_or(a, b).sum(axis=axes)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    return _out(out)


def loss_iou(a, b):
    return _out(1.0 - np.asarray(iou(a, b)))


def empirical_risk(values, defined=None) -> float:
    """Mean over defined samples, summed in index order.  ``nan`` if none are defined."""
    values = np.asarray(values, dtype=np.float64)
    if defined is not None:
        values = values[np.asarray(defined, dtype=bool)]
    if values.size == 0:
        return float("nan")
    return float(np.sum(values) / values.size)
