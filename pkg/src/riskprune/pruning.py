"""Global one-shot magnitude pruning.

Weights from every layer are ranked jointly by ``(|w|, layer, row, column)``
and the ``floor(ratio * K)`` smallest are zeroed, ``K`` being the total weight
count.  Biases are never ranked.  Because the rank order is fixed, masks for
increasing ratios are nested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .network import DenseNetwork, as_network


def n_pruned(ratio: float, n_weights: int) -> int:
    """``floor(ratio * n_weights)``, robust to ratios like ``29/100`` in floating point."""
    x = ratio * n_weights
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, x):
        return int(nearest)
    return math.floor(x)


def check_ratio(ratio) -> float:
    ratio = float(ratio)
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"pruning ratio must lie in [0, 1), got {ratio}")
    return ratio


@dataclass(frozen=True, eq=False)
class PruneMask:
    """Zeroed positions, one boolean array per layer (True = zeroed)."""

    zeroed: tuple[np.ndarray, ...]
    ratio: float
    threshold: float

    @property
    def n_zeroed(self) -> int:
        return int(sum(m.sum() for m in self.zeroed))

    def coordinates(self) -> set[tuple[int, int, int]]:
        return {
            (k, int(r), int(c))
            for k, m in enumerate(self.zeroed)
            for r, c in zip(*np.nonzero(m))
        }


@dataclass(frozen=True, eq=False)
class PrunedNetwork:
    network: DenseNetwork
    mask: PruneMask

    def forward(self, X):
        return self.network.forward(X)

    def predict(self, X):
        return self.network.predict(X)


class MagnitudeOrder:
    """Global ascending order of weights, computed once per base network.

    Pruning many ratios from the same base network reuses one sort.
    """

    def __init__(self, net: DenseNetwork):
        self.network = net
        self._shapes = [layer.weights.shape for layer in net.layers]
        flat = np.concatenate([np.abs(layer.weights).ravel() for layer in net.layers])
        # stable sort: equal magnitudes keep flat (layer, row, column) order
        self.order = np.argsort(flat, kind="stable")
        self.sorted_magnitudes = flat[self.order]

    @property
    def n_weights(self) -> int:
        return self.order.size

    def threshold(self, ratio: float) -> float:
        count = n_pruned(check_ratio(ratio), self.n_weights)
        return 0.0 if count == 0 else float(self.sorted_magnitudes[count - 1])

    def mask(self, ratio: float) -> PruneMask:
        ratio = check_ratio(ratio)
        count = n_pruned(ratio, self.n_weights)
        flat = np.zeros(self.n_weights, dtype=bool)
        flat[self.order[:count]] = True
        zeroed = []
        start = 0
        for shape in self._shapes:
            size = shape[0] * shape[1]
            zeroed.append(flat[start:start + size].reshape(shape))
            start += size
        return PruneMask(tuple(zeroed), ratio, self.threshold(ratio))

    def prune(self, ratio: float) -> PrunedNetwork:
        mask = self.mask(ratio)
        return apply_mask(self.network, mask)


def apply_mask(net: DenseNetwork, mask: PruneMask) -> PrunedNetwork:
    weights = [np.where(m, 0.0, layer.weights) for m, layer in zip(mask.zeroed, net.layers)]
    return PrunedNetwork(net.with_weights(weights), mask)


def compute_threshold(net: DenseNetwork, ratio: float) -> float:
    """Magnitude of the last weight removed at ``ratio`` (0 when nothing is removed)."""
    return MagnitudeOrder(as_network(net)).threshold(ratio)


def prune(net: DenseNetwork, ratio: float) -> PrunedNetwork:
    return MagnitudeOrder(as_network(net)).prune(ratio)


def propagate_dead_neurons(pn: PrunedNetwork) -> PrunedNetwork:
    """Zero weights that cannot influence the output, iterating to a fixed point.

    A hidden neuron whose outgoing weights are all zero loses its incoming
    weights and its bias.  A hidden neuron with all-zero incoming weights and a
    zero bias emits a constant 0 (relu/identity), so its outgoing weights go.
    Forward outputs are unchanged bit-for-bit.
    """
    layers = pn.network.layers
    weights = [layer.weights.copy() for layer in layers]
    biases = [layer.biases.copy() for layer in layers]
    changed = True
    while changed:
        changed = False
        # hidden neurons live between layer k (incoming rows) and k + 1 (outgoing columns)
        for k in range(len(layers) - 1):
            w_in, w_out = weights[k], weights[k + 1]
            unused = ~np.any(w_out != 0.0, axis=0)
            stale = unused & (np.any(w_in != 0.0, axis=1) | (biases[k] != 0.0))
            if stale.any():
                w_in[stale, :] = 0.0
                biases[k][stale] = 0.0
                changed = True
            silent = ~np.any(w_in != 0.0, axis=1) & (biases[k] == 0.0)
            live_out = silent & np.any(w_out != 0.0, axis=0)
            if live_out.any():
                w_out[:, live_out] = 0.0
                changed = True
    zeroed = tuple(m | (w == 0.0) & (layer.weights != 0.0)
                   for m, w, layer in zip(pn.mask.zeroed, weights, layers))
    mask = PruneMask(zeroed, pn.mask.ratio, pn.mask.threshold)
    return PrunedNetwork(pn.network.with_weights(weights, biases), mask)


def sparsity(pn: PrunedNetwork | DenseNetwork) -> float:
    """Fraction of exactly-zero weights (biases excluded)."""
    net = pn.network if isinstance(pn, PrunedNetwork) else pn
    zeros = sum(int(np.count_nonzero(layer.weights == 0.0)) for layer in net.layers)
    return zeros / net.n_weights


def average_magnitude_map(net, layer: int = 0, shape=(28, 28)) -> np.ndarray:
    """Mean ``|w|`` of the weights leaving each input pixel, reshaped row-major."""
    if isinstance(net, PrunedNetwork):
        net = net.network
    w = as_network(net).layers[layer].weights
    rows, cols = shape
    if w.shape[1] != rows * cols:
        raise ValueError(f"layer {layer} has {w.shape[1]} inputs, expected {rows * cols}")
    return np.abs(w).mean(axis=0).reshape(rows, cols)


class MagnitudePruner(TransformerMixin, BaseEstimator):
    """Transformer over networks: ``fit`` ranks the weights, ``transform`` prunes.

    >>> pruner = MagnitudePruner(ratio=0.5).fit(net)      # doctest: +SKIP
    >>> small = pruner.transform(net)                     # doctest: +SKIP
    """

    def __init__(self, ratio=0.5, propagate=False):
        self.ratio = ratio
        self.propagate = propagate

    def fit(self, X, y=None):
        net = as_network(X)
        check_ratio(self.ratio)
        self.order_ = MagnitudeOrder(net)
        self.mask_ = self.order_.mask(self.ratio)
        self.threshold_ = self.mask_.threshold
        return self

    def transform(self, X) -> DenseNetwork:
        check_is_fitted(self, "order_")
        net = as_network(X)
        if net is not self.order_.network:
            raise ValueError("transform must receive the network passed to fit")
        pruned = apply_mask(net, self.mask_)
        if self.propagate:
            pruned = propagate_dead_neurons(pruned)
        self.pruned_ = pruned
        return pruned.network
