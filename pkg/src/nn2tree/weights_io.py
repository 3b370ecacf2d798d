"""Weight-file serialization.

One JSON document per network: version, input_dim or input_shape, and a
layers array. Matrices are stored as flat row-major number lists next to
their declared shape; all numbers keep full double precision, so a
load/save round trip is byte-identical.
"""

from __future__ import annotations

import json

import numpy as np

from . import activations
from .activations import PwlActivation
from .layers import ConvLayer, DenseLayer, DimensionError, ResidualBlock, RnnCell
from .network import NetworkSpec

SCHEMA_VERSION = 1

_NAMED_ACTIVATIONS = {
    "identity": activations.identity,
    "linear": activations.identity,
    "relu": activations.relu,
    "leaky_relu": activations.leaky_relu,
    "hard_tanh": activations.hard_tanh,
}


class SchemaError(ValueError):
    """A weight or tree file violated its schema; message carries the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _matrix_doc(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}


def _activation_doc(act: PwlActivation | None) -> dict | None:
    if act is None:
        return None
    return {
        "name": act.name,
        "breakpoints": [float(v) for v in act.breakpoints],
        "slopes": [float(v) for v in act.slopes],
        "intercepts": [float(v) for v in act.intercepts],
    }


def network_to_doc(net: NetworkSpec) -> dict:
    doc: dict = {"version": SCHEMA_VERSION, "name": net.name, "seed": net.seed}
    if net.input_shape is not None:
        doc["input_shape"] = list(net.input_shape)
    else:
        doc["input_dim"] = net.input_dim
    layers = []
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            layers.append({
                "type": "dense",
                "shape": list(layer.weights.shape),
                "weights": [float(v) for v in layer.weights.ravel()],
                "bias": [float(v) for v in layer.bias],
                "activation": _activation_doc(layer.activation),
            })
        elif isinstance(layer, ResidualBlock):
            layers.append({
                "type": "residual",
                "shape": list(layer.weights.shape),
                "weights": [float(v) for v in layer.weights.ravel()],
                "activation": _activation_doc(layer.activation),
            })
        elif isinstance(layer, ConvLayer):
            layers.append({
                "type": "conv",
                "shape": list(layer.kernel.shape),
                "weights": [float(v) for v in layer.kernel.ravel()],
                "bias": [float(v) for v in layer.bias],
                "stride": layer.stride,
                "padding": layer.padding,
                "activation": _activation_doc(layer.activation),
            })
        elif isinstance(layer, RnnCell):
            layers.append({
                "type": "rnn",
                "w_rec": _matrix_doc(layer.w_rec),
                "u_in": _matrix_doc(layer.u_in),
                "v_out": _matrix_doc(layer.v_out),
                "bias_h": [float(v) for v in layer.bias_h],
                "activation": _activation_doc(layer.activation),
            })
        else:
            raise TypeError(f"cannot serialize layer type {type(layer).__name__}")
    doc["layers"] = layers
    return doc


def save_network(net: NetworkSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_doc(net), fh, indent=2)
        fh.write("\n")


def _expect(doc: dict, key: str, path: str):
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return doc[key]


def _load_array(doc, path: str, shape=None) -> np.ndarray:
    try:
        a = np.asarray(doc, dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError(path, "expected an array of numbers") from None
    if shape is not None:
        if a.size != int(np.prod(shape)):
            raise SchemaError(
                path, f"expected {int(np.prod(shape))} values for shape {list(shape)}, got {a.size}"
            )
        a = a.reshape(shape)
    return a


def _load_matrix_doc(doc, path: str) -> np.ndarray:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected {shape, data}")
    shape = _expect(doc, "shape", path)
    return _load_array(_expect(doc, "data", path), f"{path}.data", shape)


def activation_from_doc(doc, path: str = "activation") -> PwlActivation | None:
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object or null")
    name = doc.get("name", "pwl")
    if "slopes" not in doc:
        if name == "leaky_relu" and "negative_slope" in doc:
            return activations.leaky_relu(float(doc["negative_slope"]))
        if name in _NAMED_ACTIVATIONS:
            return _NAMED_ACTIVATIONS[name]()
        raise SchemaError(f"{path}.name", f"unknown activation name {name!r}")
    try:
        return PwlActivation(
            breakpoints=doc.get("breakpoints", []),
            slopes=doc["slopes"],
            intercepts=doc.get("intercepts"),
            name=name,
        )
    except ValueError as e:
        raise SchemaError(path, str(e)) from None


def network_from_doc(doc: dict) -> NetworkSpec:
    if not isinstance(doc, dict):
        raise SchemaError("$", "top level must be an object")
    version = _expect(doc, "version", "$")
    if version != SCHEMA_VERSION:
        raise SchemaError("$.version", f"unsupported version {version}")
    if "layers" not in doc or not isinstance(doc["layers"], list) or not doc["layers"]:
        raise SchemaError("$.layers", "expected a non-empty array")
    layers = []
    for i, ldoc in enumerate(doc["layers"]):
        path = f"$.layers[{i}]"
        if not isinstance(ldoc, dict):
            raise SchemaError(path, "expected an object")
        ltype = _expect(ldoc, "type", path)
        act = activation_from_doc(ldoc.get("activation"), f"{path}.activation")
        try:
            if ltype == "dense":
                shape = _expect(ldoc, "shape", path)
                layers.append(DenseLayer(
                    weights=_load_array(_expect(ldoc, "weights", path), f"{path}.weights", shape),
                    bias=_load_array(_expect(ldoc, "bias", path), f"{path}.bias"),
                    activation=act,
                ))
            elif ltype == "residual":
                shape = _expect(ldoc, "shape", path)
                if act is None:
                    raise SchemaError(f"{path}.activation", "residual blocks require an activation")
                layers.append(ResidualBlock(
                    weights=_load_array(_expect(ldoc, "weights", path), f"{path}.weights", shape),
                    activation=act,
                ))
            elif ltype == "conv":
                shape = _expect(ldoc, "shape", path)
                layers.append(ConvLayer(
                    kernel=_load_array(_expect(ldoc, "weights", path), f"{path}.weights", shape),
                    bias=_load_array(_expect(ldoc, "bias", path), f"{path}.bias"),
                    stride=int(ldoc.get("stride", 1)),
                    padding=int(ldoc.get("padding", 0)),
                    activation=act,
                ))
            elif ltype == "rnn":
                if act is None:
                    raise SchemaError(f"{path}.activation", "rnn cells require an activation")
                layers.append(RnnCell(
                    w_rec=_load_matrix_doc(_expect(ldoc, "w_rec", path), f"{path}.w_rec"),
                    u_in=_load_matrix_doc(_expect(ldoc, "u_in", path), f"{path}.u_in"),
                    v_out=_load_matrix_doc(_expect(ldoc, "v_out", path), f"{path}.v_out"),
                    bias_h=_load_array(_expect(ldoc, "bias_h", path), f"{path}.bias_h"),
                    activation=act,
                ))
            else:
                raise SchemaError(f"{path}.type", f"unknown layer type {ltype!r}")
        except DimensionError as e:
            raise SchemaError(path, str(e)) from None
    try:
        return NetworkSpec(
            layers=layers,
            input_dim=doc.get("input_dim"),
            input_shape=tuple(doc["input_shape"]) if "input_shape" in doc else None,
            name=doc.get("name", ""),
            seed=doc.get("seed"),
        )
    except (DimensionError, ValueError) as e:
        raise SchemaError("$.layers", str(e)) from None


def load_network(path) -> NetworkSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaError(f"line {e.lineno}, column {e.colno}", e.msg) from None
    return network_from_doc(doc)
