import json

import numpy as np
import pytest

from nn2tree import activations as act_lib
from nn2tree.layers import ConvLayer, DenseLayer, ResidualBlock, RnnCell
from nn2tree.network import NetworkSpec, forward
from nn2tree.weights_io import SchemaError, load_network, network_to_doc, save_network
from conftest import random_dense_net


def test_round_trip_dense(tmp_path):
    rng = np.random.default_rng(1)
    net = random_dense_net(rng, activation=act_lib.leaky_relu(0.3))
    path = tmp_path / "w.json"
    save_network(net, path)
    loaded = load_network(path)
    assert loaded.input_dim == net.input_dim
    for a, b in zip(net.layers, loaded.layers):
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
        if a.activation is None:
            assert b.activation is None
        else:
            assert np.array_equal(a.activation.breakpoints, b.activation.breakpoints)
            assert np.array_equal(a.activation.slopes, b.activation.slopes)
            assert np.array_equal(a.activation.intercepts, b.activation.intercepts)


def test_resave_is_byte_identical(tmp_path):
    rng = np.random.default_rng(2)
    net = random_dense_net(rng)
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    save_network(net, first)
    save_network(load_network(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_round_trip_conv_and_rnn(tmp_path):
    rng = np.random.default_rng(3)
    conv = NetworkSpec(layers=[
        ConvLayer(rng.normal(size=(2, 1, 3, 3)), rng.normal(size=2),
                  stride=2, padding=1, activation=act_lib.relu()),
        ConvLayer(rng.normal(size=(1, 2, 1, 1)), rng.normal(size=1), activation=None),
    ], input_shape=(1, 5, 5))
    path = tmp_path / "conv.json"
    save_network(conv, path)
    loaded = load_network(path)
    f0 = rng.normal(size=(1, 5, 5))
    assert np.array_equal(forward(conv, f0)[0], forward(loaded, f0)[0])

    cell = RnnCell(rng.normal(size=(2, 2)), rng.normal(size=(2, 3)),
                   rng.normal(size=(1, 2)), rng.normal(size=2), act_lib.relu())
    rnn_net = NetworkSpec(layers=[cell], input_dim=3)
    rnn_path = tmp_path / "rnn.json"
    save_network(rnn_net, rnn_path)
    reloaded = load_network(rnn_path)
    assert np.array_equal(reloaded.layers[0].w_rec, cell.w_rec)
    assert np.array_equal(reloaded.layers[0].u_in, cell.u_in)
    assert np.array_equal(reloaded.layers[0].v_out, cell.v_out)


def test_residual_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    net = NetworkSpec(layers=[
        DenseLayer(rng.normal(size=(2, 1)), rng.normal(size=2), None),
        ResidualBlock(rng.normal(size=(2, 2)), act_lib.leaky_relu(0.3)),
    ], input_dim=1)
    path = tmp_path / "res.json"
    save_network(net, path)
    loaded = load_network(path)
    x = rng.normal(size=1)
    assert np.array_equal(forward(net, x)[0], forward(loaded, x)[0])


def test_dimension_chain_error_names_layers(tmp_path):
    rng = np.random.default_rng(5)
    doc = network_to_doc(random_dense_net(rng, d0=2, activation=act_lib.relu()))
    doc["layers"] = [
        {"type": "dense", "shape": [3, 2],
         "weights": [1.0] * 6, "bias": [0.0] * 3,
         "activation": {"name": "relu"}},
        {"type": "dense", "shape": [2, 2],
         "weights": [1.0] * 4, "bias": [0.0] * 2, "activation": None},
    ]
    doc["input_dim"] = 2
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError) as err:
        load_network(path)
    assert "layers[1]" in str(err.value) and "layers[0]" in str(err.value)


def test_wrong_value_count(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({
        "version": 1, "input_dim": 1,
        "layers": [{"type": "dense", "shape": [2, 1], "weights": [1.0, 2.0, 3.0],
                    "bias": [0.0, 0.0], "activation": None}],
    }))
    with pytest.raises(SchemaError, match=r"layers\[0\].weights"):
        load_network(path)


def test_unknown_activation_name(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({
        "version": 1, "input_dim": 1,
        "layers": [{"type": "dense", "shape": [1, 1], "weights": [1.0],
                    "bias": [0.0], "activation": {"name": "swish"}}],
    }))
    with pytest.raises(SchemaError, match="unknown activation name"):
        load_network(path)


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 1,\n  "layers": [,]\n}')
    with pytest.raises(SchemaError, match="line 2"):
        load_network(path)


def test_named_activation_shortcuts(tmp_path):
    path = tmp_path / "w.json"
    path.write_text(json.dumps({
        "version": 1, "input_dim": 1,
        "layers": [
            {"type": "dense", "shape": [1, 1], "weights": [2.0], "bias": [0.5],
             "activation": {"name": "leaky_relu", "negative_slope": 0.3}},
            {"type": "dense", "shape": [1, 1], "weights": [1.0], "bias": [0.0],
             "activation": None},
        ],
    }))
    net = load_network(path)
    assert net.layers[0].activation.slopes[0] == 0.3
    out, _ = forward(net, [-1.0])
    assert out == pytest.approx([0.3 * (2.0 * -1.0 + 0.5)])
