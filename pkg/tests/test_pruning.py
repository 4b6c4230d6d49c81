import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskprune.network import DenseNetwork, Layer, forward
from riskprune.pruning import (
    MagnitudeOrder,
    MagnitudePruner,
    average_magnitude_map,
    compute_threshold,
    n_pruned,
    propagate_dead_neurons,
    prune,
    sparsity,
)


def four_weight_net():
    return DenseNetwork([Layer(np.array([[0.5, -0.1, 0.3, -0.7]]), np.zeros(1), "identity")])


def zero_count(net):
    return sum(int(np.count_nonzero(layer.weights == 0.0)) for layer in net.layers)


class TestThreshold:
    def test_hand_example(self):
        assert compute_threshold(four_weight_net(), 0.5) == 0.3

    def test_zero_ratio(self, small_net):
        assert compute_threshold(small_net, 0.0) == 0.0

    def test_full_sort_oracle(self, rng):
        w = rng.normal(size=(10, 10))
        net = DenseNetwork([Layer(w, np.zeros(10), "softmax")])
        assert compute_threshold(net, 0.78) == sorted(np.abs(w).ravel())[77]

    @pytest.mark.parametrize("ratio", [-0.1, 1.0, 1.5])
    def test_out_of_range(self, small_net, ratio):
        with pytest.raises(ValueError):
            compute_threshold(small_net, ratio)


class TestPrune:
    def test_hand_example(self):
        pruned = prune(four_weight_net(), 0.5)
        np.testing.assert_array_equal(pruned.network.layers[0].weights, [[0.5, 0.0, 0.0, -0.7]])
        assert pruned.mask.threshold == 0.3
        assert pruned.mask.coordinates() == {(0, 0, 1), (0, 0, 2)}

    def test_zero_ratio_is_identity(self, small_net, rng):
        X = rng.random((100, 6))
        pruned = prune(small_net, 0.0)
        assert pruned.mask.n_zeroed == 0
        np.testing.assert_array_equal(forward(pruned.network, X), forward(small_net, X))

    def test_count_at_099_for_118282_weights(self):
        net = DenseNetwork([Layer(np.linspace(0.01, 1.0, 118_282)[None, :], np.zeros(1), "identity")])
        pruned = prune(net, 0.99)
        assert zero_count(pruned.network) == 117_099 == math.floor(0.99 * 118_282)

    def test_count_on_mnist_architecture(self):
        net = DenseNetwork.random([784, 128, 128, 10], seed=0)
        assert net.n_weights == 118_016
        assert prune(net, 0.99).mask.n_zeroed == math.floor(0.99 * 118_016)

    def test_biases_untouched(self, small_net):
        pruned = prune(small_net, 0.9)
        for a, b in zip(pruned.network.layers, small_net.layers):
            assert a.biases.tobytes() == b.biases.tobytes()

    def test_unmasked_weights_bit_equal(self, small_net):
        pruned = prune(small_net, 0.6)
        for m, a, b in zip(pruned.mask.zeroed, pruned.network.layers, small_net.layers):
            assert np.all(a.weights[m] == 0.0)
            assert a.weights[~m].tobytes() == b.weights[~m].tobytes()

    def test_ties_broken_by_coordinate(self):
        w0 = np.array([[1.0, 0.5], [0.5, 2.0]])
        w1 = np.array([[0.5, 3.0]])
        net = DenseNetwork([Layer(w0, np.zeros(2)), Layer(w1, np.zeros(1), "identity")])
        # three weights of magnitude 0.5: (0,0,1), (0,1,0), (1,0,0)
        assert prune(net, 2 / 6).mask.coordinates() == {(0, 0, 1), (0, 1, 0)}
        assert prune(net, 2 / 6).mask.coordinates() == prune(net, 2 / 6).mask.coordinates()

    def test_grid_ratio_counts(self):
        # 0.29 * 100 is 28.999999999999996 in floating point
        assert n_pruned(0.29, 100) == 29
        assert n_pruned(0.295, 100) == 29
        assert n_pruned(0.0, 100) == 0


@st.composite
def nets(draw):
    sizes = draw(st.lists(st.integers(1, 7), min_size=2, max_size=4))
    seed = draw(st.integers(0, 2**32 - 1))
    return DenseNetwork.random(sizes, seed=seed, scale=1.0)


class TestProperties:
    @given(nets(), st.floats(0.0, 0.999))
    @settings(max_examples=60, deadline=None)
    def test_exact_count(self, net, ratio):
        pruned = prune(net, ratio)
        assert pruned.mask.n_zeroed == n_pruned(ratio, net.n_weights)
        assert zero_count(pruned.network) >= pruned.mask.n_zeroed

    @given(nets(), st.floats(0.0, 0.999), st.floats(0.0, 0.999))
    @settings(max_examples=60, deadline=None)
    def test_nesting(self, net, a, b):
        lo, hi = sorted((a, b))
        assert prune(net, lo).mask.coordinates() <= prune(net, hi).mask.coordinates()

    @given(nets(), st.floats(0.0, 0.999))
    @settings(max_examples=40, deadline=None)
    def test_zeroed_are_smallest(self, net, ratio):
        mask = prune(net, ratio).mask
        mags = [np.abs(layer.weights) for layer in net.layers]
        zeroed = np.concatenate([m[z] for m, z in zip(mags, mask.zeroed)])
        kept = np.concatenate([m[~z] for m, z in zip(mags, mask.zeroed)])
        if zeroed.size and kept.size:
            assert zeroed.max() <= kept.min()


def dead_neuron_net():
    w0 = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 1.0]])
    b0 = np.array([0.1, 0.0, 0.2])
    w1 = np.array([[1.0, 0.0, 2.0], [-1.0, 0.0, 0.5]])  # hidden neuron 1 feeds nothing
    return DenseNetwork([Layer(w0, b0), Layer(w1, np.zeros(2), "softmax")])


class TestPropagation:
    def test_unused_neuron_loses_inputs(self, rng):
        pn = prune(dead_neuron_net(), 0.0)
        out = propagate_dead_neurons(pn)
        np.testing.assert_array_equal(out.network.layers[0].weights[1], [0.0, 0.0])
        X = rng.normal(size=(100, 2))
        assert forward(out.network, X).tobytes() == forward(pn.network, X).tobytes()
        assert out.mask.coordinates() == {(0, 1, 0), (0, 1, 1)}

    def test_no_dead_neurons_is_fixed_point(self, small_net):
        pn = prune(small_net, 0.1)
        out = propagate_dead_neurons(pn)
        assert out.mask.coordinates() == pn.mask.coordinates()

    def test_constant_neuron_keeps_outputs(self):
        w0 = np.array([[0.0, 0.0], [1.0, 1.0]])
        net = DenseNetwork([Layer(w0, np.array([0.7, 0.0])), Layer(np.ones((2, 2)), np.zeros(2), "softmax")])
        out = propagate_dead_neurons(prune(net, 0.0))
        np.testing.assert_array_equal(out.network.layers[1].weights, np.ones((2, 2)))

    def test_silent_neuron_loses_outputs(self):
        w0 = np.array([[0.0, 0.0], [1.0, 1.0]])
        net = DenseNetwork([Layer(w0, np.zeros(2)), Layer(np.ones((2, 2)), np.zeros(2), "softmax")])
        out = propagate_dead_neurons(prune(net, 0.0))
        np.testing.assert_array_equal(out.network.layers[1].weights[:, 0], [0.0, 0.0])

    def test_cascades_backwards(self):
        # neuron in the second hidden layer is unused, which leaves a first-layer neuron unused
        w0 = np.array([[1.0, 1.0], [1.0, -1.0]])
        w1 = np.array([[0.0, 2.0], [1.0, 0.0]])
        w2 = np.array([[0.0, 1.0], [0.0, -1.0]])
        net = DenseNetwork([Layer(w0, np.zeros(2)), Layer(w1, np.zeros(2)), Layer(w2, np.zeros(2), "softmax")])
        out = propagate_dead_neurons(prune(net, 0.0))
        np.testing.assert_array_equal(out.network.layers[1].weights[0], [0.0, 0.0])
        np.testing.assert_array_equal(out.network.layers[0].weights[1], [0.0, 0.0])

    @pytest.mark.parametrize("seed", range(5))
    def test_random_nets_bit_exact_and_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        net = DenseNetwork.random([10, 6, 5, 4], seed=seed, scale=1.0)
        pn = prune(net, 0.8)
        once = propagate_dead_neurons(pn)
        twice = propagate_dead_neurons(once)
        X = rng.normal(size=(100, 10))
        assert forward(once.network, X).tobytes() == forward(pn.network, X).tobytes()
        for a, b in zip(once.network.layers, twice.network.layers):
            assert a.weights.tobytes() == b.weights.tobytes()
            assert a.biases.tobytes() == b.biases.tobytes()
        assert sparsity(once) >= sparsity(pn)


class TestSparsity:
    def test_zero_ratio(self, small_net):
        assert sparsity(prune(small_net, 0.0)) == 0.0

    def test_half_of_four(self):
        assert sparsity(prune(four_weight_net(), 0.5)) == 0.5


class TestMagnitudeMap:
    def test_constant_weights(self):
        net = DenseNetwork([Layer(np.ones((128, 784)), np.zeros(128)), Layer(np.ones((10, 128)), np.zeros(10), "softmax")])
        np.testing.assert_array_equal(average_magnitude_map(net), np.ones((28, 28)))

    def test_zero_weights(self):
        np.testing.assert_array_equal(average_magnitude_map(DenseNetwork.zeros([784, 128, 10])), np.zeros((28, 28)))

    def test_column_mean_oracle(self):
        net = DenseNetwork.random([784, 16, 10], seed=2)
        w = net.layers[0].weights
        grid = average_magnitude_map(net)
        for pixel in (0, 27, 28, 400, 783):
            expected = sum(abs(w[r, pixel]) for r in range(16)) / 16
            assert abs(grid[pixel // 28, pixel % 28] - expected) <= 1e-12

    def test_wrong_input_dimension(self, small_net):
        with pytest.raises(ValueError):
            average_magnitude_map(small_net)


class TestEstimator:
    def test_fit_transform(self, small_net, rng):
        pruner = MagnitudePruner(ratio=0.5)
        out = pruner.fit(small_net).transform(small_net)
        assert pruner.mask_.n_zeroed == n_pruned(0.5, small_net.n_weights)
        assert pruner.threshold_ == compute_threshold(small_net, 0.5)
        X = rng.random((5, 6))
        np.testing.assert_array_equal(forward(out, X), forward(prune(small_net, 0.5).network, X))

    def test_reuse_order_matches_fresh(self, small_net):
        order = MagnitudeOrder(small_net)
        for ratio in (0.1, 0.4, 0.7):
            assert order.mask(ratio).coordinates() == prune(small_net, ratio).mask.coordinates()

    def test_get_params(self):
        assert MagnitudePruner(ratio=0.3, propagate=True).get_params() == {"ratio": 0.3, "propagate": True}
