import numpy as np
import pytest

from grainflow.geometry import LabeledNetwork
from grainflow.kernels import KernelSuite, WeightOmega


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def suite02():
    return KernelSuite(0.02)


@pytest.fixture(scope="session")
def suite05():
    return KernelSuite(0.05)


@pytest.fixture(scope="session")
def weight_one():
    return WeightOmega("constant-one")


@pytest.fixture(scope="session")
def weight_exp():
    return WeightOmega("exponential")


def make_square(side=1.0, origin=(0.0, 0.0)):
    x, y = origin
    verts = np.array([[x, y], [x + side, y], [x + side, y + side], [x, y + side]])
    edges = np.array([[0, 1, 1, 2], [1, 2, 1, 2], [2, 3, 1, 2], [3, 0, 1, 2]])
    return LabeledNetwork(verts, edges, 2)


def make_polyline(points, left=1, right=1):
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    edges = np.column_stack([
        np.arange(n - 1), np.arange(1, n),
        np.full(n - 1, left, dtype=np.int64), np.full(n - 1, right, dtype=np.int64),
    ])
    return LabeledNetwork(points, edges, max(left, right, 2))


@pytest.fixture
def unit_square():
    return make_square()


def fan_area_oracle(net, label):
    """Independent area oracle: triangle fan from an arbitrary base point."""
    ids, signs = net.directed_boundary(label)
    a = net.vertices[net.edges[ids, 0]].copy()
    b = net.vertices[net.edges[ids, 1]].copy()
    swap = signs < 0
    a[swap], b[swap] = b[swap].copy(), a[swap].copy()
    p0 = np.array([0.137, -0.291])  # arbitrary fan apex
    ra = a - p0
    rb = b - p0
    return 0.5 * float(np.sum(ra[:, 0] * rb[:, 1] - ra[:, 1] * rb[:, 0]))
