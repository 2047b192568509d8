import numpy as np
import pytest

from subsplit.network import Activation, DenseLayer, Subnetwork, build_mlp
from subsplit.tensor import RngState


def central_diff(fn, x, h=1e-5):
    """Plain per-coordinate central differences, kept apart from the library's checker."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def linear(W, b=None, act=Activation.IDENTITY):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    b = np.zeros(W.shape[0]) if b is None else np.asarray(b, dtype=float)
    return DenseLayer(W, b, act)


def scalar_sub(w, b=0.0, act=Activation.IDENTITY):
    return Subnetwork((linear([[w]], [b], act),))


@pytest.fixture
def rng():
    return RngState(1234)


@pytest.fixture
def small_net(rng):
    net = build_mlp([4, 6, 5, 6, 3], rng, n=3)
    subs = [s.with_params([(W, rng.uniform(-0.3, 0.3, b.shape)) for W, b in s.params()])
            for s in net.subnetworks]
    return net.__class__(tuple(subs), net.loss, net.split_at)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
