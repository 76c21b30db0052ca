import numpy as np
import pytest

from mtlsense import network
from mtlsense.network import Branch, NetworkSpec


def numerical_gradient(spec, params, x, y, h=1e-5):
    """Central finite differences of the global loss, one entry at a time."""
    grads = {}
    for key, p in params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = network.loss(spec, network.forward(spec, params, x), y)[0]
            p[idx] = orig - h
            down = network.loss(spec, network.forward(spec, params, x), y)[0]
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads[key] = g
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for key in analytic:
        a, n = analytic[key], numeric[key]
        rel = np.abs(a - n) / np.maximum(np.abs(a), 1e-8)
        worst = max(worst, float(rel.max()))
    return worst


def small_spec(with_joint=True, alphas=(0.7, 1.3, 2.0)):
    branches = [Branch("o2", (3,), ("O2",), alphas[1]), Branch("t", (3,), ("T",), alphas[2])]
    if with_joint:
        branches.insert(0, Branch("joint", (), ("O2", "T"), alphas[0]))
    else:
        branches = [Branch(b.name, b.hidden, b.outputs, a) for b, a in zip(branches, alphas[:2])]
    return NetworkSpec((4,), tuple(branches), input_dim=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
