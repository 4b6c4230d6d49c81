"""Dense feed-forward classification networks.

A :class:`DenseNetwork` is an immutable stack of :class:`Layer` objects.  All
arithmetic is float64.  :class:`NetworkClassifier` is the scikit-learn style
wrapper used to produce desk-scale checkpoints with plain mini-batch SGD.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

ACTIVATIONS = ("relu", "softmax", "identity")


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine layer ``activation(weights @ x + biases)``.

    ``weights`` has shape ``(out_dim, in_dim)``.
    """

    weights: np.ndarray
    biases: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        b = np.array(self.biases, dtype=np.float64, copy=True)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(
                f"biases shape {b.shape} does not match out_dim {w.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


class DenseNetwork:
    """Immutable layered network.  Safe to share between threads."""

    def __init__(self, layers: Sequence[Layer]):
        layers = tuple(layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].in_dim != layers[k - 1].out_dim:
                raise ValueError(
                    f"layer {k} expects {layers[k].in_dim} inputs but layer "
                    f"{k - 1} produces {layers[k - 1].out_dim}"
                )
        for k, layer in enumerate(layers[:-1]):
            if layer.activation == "softmax":
                raise ValueError(f"softmax is only allowed on the last layer (layer {k})")
        self._layers = layers

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "DenseNetwork":
        sizes = _check_sizes(sizes)
        return cls(
            Layer(np.zeros((o, i)), np.zeros(o), "softmax" if k == len(sizes) - 2 else "relu")
            for k, (i, o) in enumerate(zip(sizes[:-1], sizes[1:]))
        )

    @classmethod
    def random(cls, sizes: Sequence[int], seed=None, scale: float | None = None) -> "DenseNetwork":
        """He-initialised network with zero biases (or N(0, scale) everywhere if ``scale``)."""
        sizes = _check_sizes(sizes)
        rng = np.random.default_rng(seed)
        layers = []
        for k, (i, o) in enumerate(zip(sizes[:-1], sizes[1:])):
            if scale is None:
                w = rng.normal(0.0, np.sqrt(2.0 / i), size=(o, i))
                b = np.zeros(o)
            else:
                w = rng.normal(0.0, scale, size=(o, i))
                b = rng.normal(0.0, scale, size=o)
            layers.append(Layer(w, b, "softmax" if k == len(sizes) - 2 else "relu"))
        return cls(layers)

    @property
    def layers(self) -> tuple[Layer, ...]:
        return self._layers

    @property
    def sizes(self) -> list[int]:
        return [self._layers[0].in_dim] + [layer.out_dim for layer in self._layers]

    @property
    def n_inputs(self) -> int:
        return self._layers[0].in_dim

    @property
    def n_outputs(self) -> int:
        return self._layers[-1].out_dim

    @property
    def n_weights(self) -> int:
        return sum(layer.weights.size for layer in self._layers)

    def with_weights(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray] | None = None) -> "DenseNetwork":
        """Copy of this network with replaced weight (and optionally bias) arrays."""
        if biases is None:
            biases = [layer.biases for layer in self._layers]
        return DenseNetwork(
            Layer(w, b, layer.activation) for w, b, layer in zip(weights, biases, self._layers)
        )

    def forward(self, X) -> np.ndarray:
        return forward(self, X)

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def __repr__(self):
        acts = ",".join(layer.activation for layer in self._layers)
        return f"DenseNetwork(sizes={self.sizes}, activations=[{acts}])"


def _check_sizes(sizes) -> list[int]:
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid architecture {sizes}")
    return sizes


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "softmax":
        return softmax(z)
    return z


def _as_inputs(net: DenseNetwork, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.n_inputs:
        raise ValueError(
            f"input has {X.shape[-1] if X.ndim else 0} features, network expects {net.n_inputs}"
        )
    return X, single


def forward(net: DenseNetwork, X) -> np.ndarray:
    """Scores for a single input vector or a batch ``(n, n_inputs)``."""
    X, single = _as_inputs(net, X)
    h = X
    for layer in net.layers:
        h = _activate(h @ layer.weights.T + layer.biases, layer.activation)
    return h[0] if single else h


def predict(net: DenseNetwork, X) -> np.ndarray | int:
    """Arg-max class; ties resolve to the lowest index."""
    scores = forward(net, X)
    labels = np.argmax(scores, axis=-1)
    return int(labels) if np.ndim(labels) == 0 else labels


def max_confidence(scores) -> np.ndarray | float:
    """Largest score per row (or of a single score vector)."""
    scores = np.asarray(scores, dtype=np.float64)
    out = scores.max(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def count_parameters(net: DenseNetwork | Sequence[int]) -> int:
    """Weights plus biases.  Accepts a network or a list of layer sizes."""
    if isinstance(net, DenseNetwork):
        return sum(layer.weights.size + layer.biases.size for layer in net.layers)
    sizes = _check_sizes(net)
    return sum(o * i + o for i, o in zip(sizes[:-1], sizes[1:]))


def loss_and_gradients(net: DenseNetwork, X, y) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy of the softmax output and its gradients.

    Returns ``(loss, weight_grads, bias_grads)``, one array per layer.
    Assumes relu/identity hidden layers and a softmax output layer.
    """
    X, _ = _as_inputs(net, X)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    activations = [X]
    pre = []
    h = X
    for layer in net.layers:
        z = h @ layer.weights.T + layer.biases
        pre.append(z)
        h = _activate(z, layer.activation)
        activations.append(h)
    probs = activations[-1]
    loss = -float(np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None))))

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    w_grads: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    b_grads: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    for k in range(len(net.layers) - 1, -1, -1):
        w_grads[k] = delta.T @ activations[k]
        b_grads[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ net.layers[k].weights
            if net.layers[k - 1].activation == "relu":
                delta = delta * (pre[k - 1] > 0)
    return loss, w_grads, b_grads


def train_sgd(
    sizes: Sequence[int],
    X,
    y,
    epochs: int = 10,
    learning_rate: float = 0.1,
    batch_size: int = 32,
    seed: int = 0,
) -> DenseNetwork:
    """Plain mini-batch SGD on cross-entropy.  Bit-reproducible for a fixed seed."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data is empty")
    if len(y) != len(X):
        raise ValueError("X and y have different lengths")
    if epochs <= 0:
        raise ValueError("epochs must be positive")
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    sizes = _check_sizes(sizes)
    if sizes[0] != X.shape[1]:
        raise ValueError(f"architecture expects {sizes[0]} inputs, data has {X.shape[1]}")
    if y.min() < 0 or y.max() >= sizes[-1]:
        raise ValueError("labels out of range for the output layer")

    rng = np.random.default_rng(seed)
    net = DenseNetwork.random(sizes, seed=rng)
    weights = [layer.weights.copy() for layer in net.layers]
    biases = [layer.biases.copy() for layer in net.layers]
    for _ in range(epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), batch_size):
            idx = order[start:start + batch_size]
            _, gw, gb = loss_and_gradients(net, X[idx], y[idx])
            for k in range(len(weights)):
                weights[k] -= learning_rate * gw[k]
                biases[k] -= learning_rate * gb[k]
            net = net.with_weights(weights, biases)
    return net


class NetworkClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn classifier backed by a :class:`DenseNetwork`.

    ``hidden_layer_sizes`` sets the hidden widths; input and output widths come
    from the data (``n_classes`` overrides the output width).
    """

    def __init__(self, hidden_layer_sizes=(128, 128), epochs=10, learning_rate=0.1,
                 batch_size=32, n_classes=None, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_classes = n_classes
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n_classes = self.n_classes if self.n_classes is not None else int(y.max()) + 1
        sizes = [X.shape[1], *self.hidden_layer_sizes, n_classes]
        self.network_ = train_sgd(sizes, X, y, self.epochs, self.learning_rate,
                                  self.batch_size, self.random_state)
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_network(cls, network: DenseNetwork) -> "NetworkClassifier":
        """Wrap an existing network as an already-fitted classifier."""
        clf = cls(hidden_layer_sizes=tuple(network.sizes[1:-1]), n_classes=network.n_outputs)
        clf.network_ = network
        clf.classes_ = np.arange(network.n_outputs)
        clf.n_features_in_ = network.n_inputs
        return clf

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        return forward(self.network_, check_array(X, dtype=np.float64))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def as_network(obj) -> DenseNetwork:
    """Accept a :class:`DenseNetwork` or a fitted :class:`NetworkClassifier`."""
    if isinstance(obj, DenseNetwork):
        return obj
    if isinstance(obj, NetworkClassifier):
        check_is_fitted(obj, "network_")
        return obj.network_
    raise TypeError(f"expected a DenseNetwork or NetworkClassifier, got {type(obj).__name__}")
