"""Shared fixtures: trained toy bundles (once per session) and net generators."""

import numpy as np
import pytest

from nn2tree import activations as act_lib
from nn2tree.experiments import run_experiment
from nn2tree.layers import DenseLayer
from nn2tree.network import NetworkSpec

QTANH4, _ = act_lib.quantize_activation(np.tanh, 4, (-3.0, 3.0), name="qtanh4")

ACTIVATION_POOL = [
    act_lib.relu(),
    act_lib.leaky_relu(0.3),
    act_lib.hard_tanh(),
    QTANH4,
]


def random_dense_net(rng, d0=None, d_out=1, activation=None, max_hidden=3,
                     max_width=5, scale=1.0) -> NetworkSpec:
    d0 = d0 or int(rng.integers(1, 4))
    n_hidden = int(rng.integers(0, max_hidden + 1))
    act = activation if activation is not None else \
        ACTIVATION_POOL[int(rng.integers(len(ACTIVATION_POOL)))]
    dims = [d0] + [int(rng.integers(1, max_width + 1)) for _ in range(n_hidden)] + [d_out]
    layers = []
    for i in range(len(dims) - 1):
        layers.append(DenseLayer(
            weights=rng.normal(scale=scale, size=(dims[i + 1], dims[i])),
            bias=rng.normal(scale=scale, size=dims[i + 1]),
            activation=act if i < len(dims) - 2 else None,
        ))
    return NetworkSpec(layers=layers, input_dim=d0)


@pytest.fixture(scope="session")
def parabola_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("parabola_bundle")
    manifest = run_experiment("parabola", out)
    return out, manifest


@pytest.fixture(scope="session")
def halfmoon_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("halfmoon_bundle")
    manifest = run_experiment("halfmoon", out)
    return out, manifest
