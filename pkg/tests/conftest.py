from pathlib import Path

import numpy as np
import pytest

from riskprune.io import read_idx_images, read_idx_labels
from riskprune.io.splits import three_way_split
from riskprune.network import DenseNetwork, train_sgd

DATA = Path(__file__).parent / "data"
MNIST_IMAGES = DATA / "mnist5k-images-idx3-ubyte.gz"
MNIST_LABELS = DATA / "mnist5k-labels-idx1-ubyte.gz"

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_net():
    return DenseNetwork.random([6, 5, 4, 3], seed=7, scale=0.8)


@pytest.fixture(scope="session")
def mnist():
    X = read_idx_images(MNIST_IMAGES)
    y = read_idx_labels(MNIST_LABELS)
    return X, y


@pytest.fixture(scope="session")
def mnist_split(mnist):
    X, y = mnist
    return three_way_split(X, y, n_train=2000, n_cal=2700, n_val=300, seed=0)


@pytest.fixture(scope="session")
def mnist_net(mnist_split):
    s = mnist_split
    return train_sgd([784, 32, 10], s.X_train, s.y_train, epochs=30, learning_rate=0.1,
                     batch_size=32, seed=0)
