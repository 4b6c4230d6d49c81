"""Risk-controlling calibration of the pruning ratio.

The functions here evaluate empirical risk curves over a pruning grid, turn
them into p-values and run a family-wise error rate procedure.  Any ratio in
the rejected set has risk at most ``alpha`` with probability ``1 - delta``.

The estimator classes at the bottom wrap the same functions behind the usual
``fit``/``predict`` interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import losses as L
from .fwer import fallback_graph, fixed_sequence, initial_budgets
from .network import DenseNetwork, as_network, forward, max_confidence
from .pruning import MagnitudeOrder, check_ratio
from .pvalues import check_compatible, pvalue

PVALUE_N_MODES = ("kept", "paper-literal")
SELECTIVE_CONFIDENCE = "maximum softmax score of the pruned model, kept when strictly above the threshold"


def build_grid(n_ratios: int) -> np.ndarray:
    """``[0, 1/Q, ..., (Q-1)/Q]``."""
    n_ratios = int(n_ratios)
    if n_ratios < 1:
        raise ValueError("the grid needs at least one point")
    return np.arange(n_ratios) / n_ratios


def _check_unit(name, value):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return value


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence of ratios")
    for r in grid:
        check_ratio(r)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def _check_data(net: DenseNetwork, X, y, loss: str):
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != net.n_inputs:
        raise ValueError(f"data has {X.shape[1]} features, network expects {net.n_inputs}")
    if loss in L.LABEL_FREE_LOSSES:
        y = None if y is None else np.asarray(y, dtype=np.int64)
    else:
        if y is None:
            raise ValueError(f"loss {loss!r} needs labels")
        y = np.asarray(y, dtype=np.int64)
    if y is not None and len(y) != len(X):
        raise ValueError(f"{len(X)} inputs but {len(y)} labels")
    return X, y


# ---------------------------------------------------------------------------
# risk curves


def per_sample_losses(net, X, y, loss: str, grid) -> np.ndarray:
    """Loss matrix ``(len(grid), n)``; every ratio prunes the same base network."""
    net = as_network(net)
    if loss not in L.BINARY_LOSSES:
        raise ValueError(f"unknown classification loss {loss!r}; choose from {L.BINARY_LOSSES}")
    grid = _check_grid(grid)
    X, y = _check_data(net, X, y, loss)
    order = MagnitudeOrder(net)
    yhat_full = net.predict(X)
    out = np.empty((grid.size, X.shape[0]))
    for j, ratio in enumerate(grid):
        yhat = order.prune(ratio).predict(X) if ratio > 0 else yhat_full
        out[j] = L.classification_losses(loss, y, yhat, yhat_full)
    return out


def risk_curve(net, X, y, loss: str, grid) -> tuple[np.ndarray, np.ndarray]:
    """Empirical risk and defined-sample count at each grid ratio."""
    values = per_sample_losses(net, X, y, loss, grid)
    risks = np.array([L.empirical_risk(row) for row in values])
    return risks, np.full(len(risks), values.shape[1], dtype=np.int64)


# ---------------------------------------------------------------------------
# one-dimensional calibration


@dataclass
class CalibrationResult:
    grid: np.ndarray
    risks: np.ndarray
    n_defined: np.ndarray
    pvalues: np.ndarray
    rejected: list[int]
    selected: float | None
    config: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.selected is not None

    @property
    def rejected_ratios(self) -> list[float]:
        return [float(self.grid[j]) for j in self.rejected]

    def guarantee(self) -> str:
        return guarantee_statement(self.config)

    def to_dict(self) -> dict:
        return {
            "kind": "calibration",
            "config": dict(self.config),
            "selected": self.selected,
            "rejected": [int(j) for j in self.rejected],
            "rows": [
                {"ratio": float(r), "risk": _jsonable(rk), "n_defined": int(nd),
                 "pvalue": float(p), "rejected": j in set(self.rejected)}
                for j, (r, rk, nd, p) in enumerate(zip(self.grid, self.risks, self.n_defined, self.pvalues))
            ],
            "guarantee": self.guarantee(),
        }


def _jsonable(x):
    x = float(x)
    return None if np.isnan(x) else x


def guarantee_statement(config: dict) -> str:
    alpha, delta = config.get("alpha"), config.get("delta")
    text = (
        f"With probability at least {1 - delta:g} over the calibration sample, every certified "
        f"setting has expected {config.get('loss')} loss at most {alpha:g} "
        f"(p-value: {config.get('pvalue')}, procedure: {config.get('procedure')}"
    )
    if "pvalue_n" in config:
        text += f", p-value n: {config['pvalue_n']}"
    return text + ")."


def calibrate_risks(risks, n_defined, alpha: float, delta: float, pvalue_kind: str = "binomial",
                    grid=None, loss: str = "misclassify", extra_config: dict | None = None) -> CalibrationResult:
    """Fixed-sequence calibration on a precomputed risk curve (in increasing-ratio order)."""
    alpha = _check_unit("alpha", alpha)
    delta = _check_unit("delta", delta)
    check_compatible(loss, pvalue_kind)
    risks = np.asarray(risks, dtype=np.float64)
    n_defined = np.broadcast_to(np.asarray(n_defined, dtype=np.int64), risks.shape).copy()
    grid = build_grid(risks.size) if grid is None else _check_grid(grid)
    if grid.size != risks.size:
        raise ValueError("grid and risk curve lengths differ")
    pvals = np.asarray(pvalue(pvalue_kind, n_defined, risks, alpha), dtype=np.float64)
    rejected = fixed_sequence(pvals, delta)
    selected = float(grid[rejected[-1]]) if rejected else None
    config = {"alpha": alpha, "delta": delta, "loss": loss, "pvalue": pvalue_kind,
              "procedure": "fixed-sequence", "n_ratios": int(grid.size)}
    config.update(extra_config or {})
    return CalibrationResult(grid, risks, n_defined, pvals, rejected, selected, config)


def calibrate_1d(net, X, y=None, alpha: float = 0.05, delta: float = 0.1, loss: str = "misclassify",
                 pvalue_kind: str = "binomial", n_ratios: int = 100) -> CalibrationResult:
    _check_unit("alpha", alpha)
    _check_unit("delta", delta)
    check_compatible(loss, pvalue_kind)
    grid = build_grid(n_ratios)
    risks, n_def = risk_curve(net, X, y, loss, grid)
    return calibrate_risks(risks, n_def, alpha, delta, pvalue_kind, grid, loss,
                           {"n": int(n_def[0])})


def naive_ratio(grid, risks, alpha: float) -> float | None:
    """Uncertainty-blind baseline: largest ratio reached before the risk first exceeds ``alpha``."""
    chosen = None
    for r, risk in zip(grid, risks):
        if risk > alpha:
            break
        chosen = float(r)
    return chosen


# ---------------------------------------------------------------------------
# selective prediction: thresholds x pruning ratios


def _policy_max_sparsity(pairs):
    return max(pairs, key=lambda p: (p[1], -p[0]))


def _policy_min_abstention(pairs):
    return max(pairs, key=lambda p: (-p[0], p[1]))


SELECTION_POLICIES: dict[str, Callable] = {
    "max-sparsity-then-min-abstention": _policy_max_sparsity,
    "min-abstention-then-max-sparsity": _policy_min_abstention,
}


def select_pair(pairs: Sequence[tuple[float, float]], policy: str | Callable = "max-sparsity-then-min-abstention"):
    """Pick a ``(threshold, ratio)`` pair from the rejected set, or ``None`` if it is empty."""
    pairs = list(pairs)
    if not pairs:
        return None
    func = SELECTION_POLICIES[policy] if isinstance(policy, str) else policy
    return tuple(func(pairs))


def selective_grid(net, X, y, thresholds, ratios) -> tuple[np.ndarray, np.ndarray]:
    """Selective risk and kept count for every (threshold, ratio) cell.

    Returns ``(risks, n_kept)``, both shaped ``(len(thresholds), len(ratios))``;
    risks are ``nan`` where nothing is kept.
    """
    net = as_network(net)
    X, y = _check_data(net, X, y, "misclassify")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    ratios = _check_grid(ratios)
    order = MagnitudeOrder(net)
    risks = np.empty((thresholds.size, ratios.size))
    n_kept = np.empty((thresholds.size, ratios.size), dtype=np.int64)
    for j, ratio in enumerate(ratios):
        scores = forward(order.prune(ratio).network, X)
        conf = max_confidence(scores)
        correct = np.argmax(scores, axis=1) == y
        for k, t in enumerate(thresholds):
            sr = L.selective_risk(conf, correct, t)
            risks[k, j] = sr.risk
            n_kept[k, j] = sr.n_kept
    return risks, n_kept


@dataclass
class SelectiveCalibrationResult:
    thresholds: np.ndarray
    ratios: np.ndarray
    risks: np.ndarray
    n_kept: np.ndarray
    n: int
    pvalues: np.ndarray
    budgets: np.ndarray  # budget held by each cell when it was tested
    rejected: list[tuple[int, int]]
    selected: tuple[float, float] | None
    config: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.selected is not None

    @property
    def abstention(self) -> np.ndarray:
        return (self.n - self.n_kept) / self.n

    @property
    def rejected_pairs(self) -> list[tuple[float, float]]:
        return [(float(self.thresholds[k]), float(self.ratios[j])) for k, j in self.rejected]

    def guarantee(self) -> str:
        return guarantee_statement(self.config)

    def to_dict(self) -> dict:
        rej = set(self.rejected)
        rows = []
        for k, t in enumerate(self.thresholds):
            for j, r in enumerate(self.ratios):
                rows.append({
                    "threshold": float(t), "ratio": float(r), "risk": _jsonable(self.risks[k, j]),
                    "n_defined": int(self.n_kept[k, j]), "abstention": float(self.abstention[k, j]),
                    "budget": float(self.budgets[k, j]), "pvalue": float(self.pvalues[k, j]),
                    "rejected": (k, j) in rej,
                })
        return {"kind": "selective", "config": dict(self.config),
                "selected": list(self.selected) if self.selected else None,
                "rejected": [list(p) for p in self.rejected_pairs], "rows": rows,
                "guarantee": self.guarantee()}


def calibrate_selective_risks(risks, n_kept, n: int, thresholds, ratios, alpha: float, delta: float,
                              pvalue_kind: str = "binomial", pvalue_n: str = "kept",
                              policy="max-sparsity-then-min-abstention") -> SelectiveCalibrationResult:
    """Fallback-procedure calibration on a precomputed selective risk grid.

    Cells with nothing kept get p = 1: they are tested and never rejected, so
    the budget flow is the same as for any non-rejected cell.
    """
    alpha = _check_unit("alpha", alpha)
    delta = _check_unit("delta", delta)
    check_compatible("misclassify", pvalue_kind)
    if pvalue_n not in PVALUE_N_MODES:
        raise ValueError(f"pvalue_n must be one of {PVALUE_N_MODES}")
    risks = np.asarray(risks, dtype=np.float64)
    n_kept = np.asarray(n_kept, dtype=np.int64)
    trials = n_kept if pvalue_n == "kept" else np.full_like(n_kept, n)
    pvals = np.asarray(pvalue(pvalue_kind, trials, risks, alpha), dtype=np.float64)
    pvals = np.where(n_kept == 0, 1.0, pvals)
    budgets = initial_budgets(*pvals.shape, delta)
    fb = fallback_graph(pvals, delta, budgets)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    ratios = np.asarray(ratios, dtype=np.float64)
    pairs = [(float(thresholds[k]), float(ratios[j])) for k, j in fb.rejected]
    config = {"alpha": alpha, "delta": delta, "loss": "selective-misclassify", "pvalue": pvalue_kind,
              "procedure": "fallback", "pvalue_n": pvalue_n, "n": int(n),
              "policy": policy if isinstance(policy, str) else getattr(policy, "__name__", "custom"),
              "confidence": SELECTIVE_CONFIDENCE}
    return SelectiveCalibrationResult(thresholds, ratios, risks, n_kept, int(n), pvals, fb.tested_at,
                                      fb.rejected, select_pair(pairs, policy), config)


def selective_ratios(n_tested: int, n_ratios: int) -> np.ndarray:
    """``[0, 1/Q, ..., T/Q]`` with ``T < Q``."""
    if not 0 <= n_tested < n_ratios:
        raise ValueError(f"need T < Q, got T={n_tested}, Q={n_ratios}")
    return np.arange(n_tested + 1) / n_ratios


def calibrate_selective(net, X, y, thresholds, alpha: float = 0.05, delta: float = 0.1,
                        n_tested: int = 80, n_ratios: int = 100, pvalue_kind: str = "binomial",
                        pvalue_n: str = "kept", policy="max-sparsity-then-min-abstention") -> SelectiveCalibrationResult:
    _check_unit("alpha", alpha)
    _check_unit("delta", delta)
    check_compatible("misclassify", pvalue_kind)
    ratios = selective_ratios(n_tested, n_ratios)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if thresholds.ndim != 1 or thresholds.size == 0 or np.any(np.diff(thresholds) <= 0):
        raise ValueError("thresholds must be a non-empty increasing sequence")
    risks, n_kept = selective_grid(net, X, y, thresholds, ratios)
    result = calibrate_selective_risks(risks, n_kept, len(X), thresholds, ratios, alpha, delta,
                                       pvalue_kind, pvalue_n, policy)
    result.config.update({"n_tested": int(n_tested), "n_ratios": int(n_ratios)})
    return result


# ---------------------------------------------------------------------------
# segmentation: 1 - IoU between dense and pruned masks


def segmentation_risk_curve(full_maps, pruned_maps: dict, beta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean ``1 - IoU`` per pruning ratio.

    ``full_maps`` is ``(n, M, N)``; ``pruned_maps`` maps ratio -> ``(n, M, N)``.
    Returns ``(ratios, risks, n)`` in increasing-ratio order.
    """
    full_mask = L.mask_from_scores(full_maps, beta)
    ratios = np.array(sorted(float(r) for r in pruned_maps))
    risks = np.empty(ratios.size)
    for j, r in enumerate(ratios):
        maps = pruned_maps[r]
        if np.shape(maps) != full_mask.shape:
            raise ValueError(f"score maps for ratio {r} have shape {np.shape(maps)}, expected {full_mask.shape}")
        risks[j] = L.empirical_risk(L.loss_iou(full_mask, L.mask_from_scores(maps, beta)))
    return ratios, risks, np.full(ratios.size, full_mask.shape[0], dtype=np.int64)


def calibrate_segmentation(full_maps, pruned_maps: dict, beta: float, alpha: float, delta: float,
                           pvalue_kind: str = "hb") -> CalibrationResult:
    check_compatible("iou", pvalue_kind)
    ratios, risks, n = segmentation_risk_curve(full_maps, pruned_maps, beta)
    return calibrate_risks(risks, n, alpha, delta, pvalue_kind, ratios, "iou",
                           {"beta": float(beta), "n": int(n[0]) if n.size else 0})


# ---------------------------------------------------------------------------
# estimators


class PruningCalibrator(ClassifierMixin, BaseEstimator):
    """Certify the largest pruning ratio whose risk stays below ``alpha``.

    ``network`` is a :class:`~riskprune.network.DenseNetwork` or a fitted
    :class:`~riskprune.network.NetworkClassifier`.  ``fit(X, y)`` uses its
    arguments as the calibration set (``y`` may be omitted for the
    ``disagree`` loss).  After fitting, ``ratio_`` is the certified ratio, or
    ``None`` when nothing could be certified, in which case prediction falls
    back to the dense network.
    """

    def __init__(self, network=None, alpha=0.05, delta=0.1, loss="misclassify",
                 pvalue="binomial", n_ratios=100):
        self.network = network
        self.alpha = alpha
        self.delta = delta
        self.loss = loss
        self.pvalue = pvalue
        self.n_ratios = n_ratios

    def fit(self, X, y=None):
        net = as_network(self.network)
        self.result_ = calibrate_1d(net, X, y, self.alpha, self.delta, self.loss, self.pvalue,
                                    self.n_ratios)
        self.ratio_ = self.result_.selected
        self.dense_network_ = net
        self.network_ = MagnitudeOrder(net).prune(self.ratio_).network if self.ratio_ else net
        self.classes_ = np.arange(net.n_outputs)
        self.n_features_in_ = net.n_inputs
        return self

    def use_ratio(self, ratio: float) -> "PruningCalibrator":
        """Deploy a different certified ratio (must belong to the rejected set)."""
        check_is_fitted(self, "result_")
        if not any(np.isclose(ratio, r, rtol=0, atol=1e-12) for r in self.result_.rejected_ratios):
            raise ValueError(f"ratio {ratio} is not certified")
        self.ratio_ = float(ratio)
        self.network_ = MagnitudeOrder(self.dense_network_).prune(ratio).network
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        return forward(self.network_, check_array(X, dtype=np.float64))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class SelectivePruningCalibrator(BaseEstimator):
    """Jointly certify a confidence threshold and a pruning ratio.

    ``predict`` returns ``-1`` where the pruned model abstains.
    """

    def __init__(self, network=None, thresholds=(0.5, 0.7, 0.9), alpha=0.05, delta=0.1,
                 n_tested=80, n_ratios=100, pvalue="binomial", pvalue_n="kept",
                 policy="max-sparsity-then-min-abstention"):
        self.network = network
        self.thresholds = thresholds
        self.alpha = alpha
        self.delta = delta
        self.n_tested = n_tested
        self.n_ratios = n_ratios
        self.pvalue = pvalue
        self.pvalue_n = pvalue_n
        self.policy = policy

    def fit(self, X, y):
        net = as_network(self.network)
        self.result_ = calibrate_selective(net, X, y, self.thresholds, self.alpha, self.delta,
                                           self.n_tested, self.n_ratios, self.pvalue,
                                           self.pvalue_n, self.policy)
        if self.result_.selected is None:
            self.threshold_, self.ratio_ = None, None
            self.network_ = net
        else:
            self.threshold_, self.ratio_ = self.result_.selected
            self.network_ = MagnitudeOrder(net).prune(self.ratio_).network
        self.n_features_in_ = net.n_inputs
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        if self.threshold_ is None:
            raise ValueError("no (threshold, ratio) pair was certified")
        scores = forward(self.network_, check_array(X, dtype=np.float64))
        labels = np.argmax(scores, axis=1)
        return np.where(max_confidence(scores) > self.threshold_, labels, -1)


class SegmentationPruningCalibrator(BaseEstimator):
    """Certify a pruning ratio from precomputed segmentation score maps.

    ``fit`` takes the dense model's maps and a ``{ratio: maps}`` dict.
    """

    def __init__(self, beta=0.5, alpha=0.05, delta=0.1, pvalue="hb"):
        self.beta = beta
        self.alpha = alpha
        self.delta = delta
        self.pvalue = pvalue

    def fit(self, full_maps, pruned_maps):
        self.result_ = calibrate_segmentation(full_maps, pruned_maps, self.beta, self.alpha,
                                              self.delta, self.pvalue)
        self.ratio_ = self.result_.selected
        return self

