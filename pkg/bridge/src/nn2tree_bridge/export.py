"""Convert PyTorch checkpoints into the nn2tree weight-file schema.

Supported module shapes:
  * nn.Sequential of Linear layers and activations (ReLU / LeakyReLU /
    Hardtanh(-1, 1) / Identity)
  * nn.Sequential of Conv2d layers and activations (requires input_shape)
  * a module exposing `.rnn` (single-layer nn.RNN, relu nonlinearity) and
    `.readout` (bias-free nn.Linear)

Every export carries verification vectors: inputs with outputs computed by
torch in double precision. The written weight file is loaded back through the
primary package and checked against those outputs before the export is
considered done; a failing self-check deletes the file and raises.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from nn2tree.network import NetworkSpec, forward
from nn2tree.rnn import rnn_forward
from nn2tree.weights_io import load_network, network_to_doc

DEFAULT_TOLERANCE = 1e-6


class UnsupportedLayerError(ValueError):
    """The checkpoint contains a module the schema cannot express."""


class ExportCheckFailed(RuntimeError):
    """Self-verification against framework outputs did not pass."""


@dataclass
class ExportManifest:
    source_framework: str
    source_version: str
    layer_map: list[tuple[str, str]]
    activation_map: dict
    n_verify: int
    tolerance: float
    max_deviation: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "source_framework": self.source_framework,
            "source_version": self.source_version,
            "layer_map": [list(pair) for pair in self.layer_map],
            "activation_map": self.activation_map,
            "n_verify": self.n_verify,
            "tolerance": self.tolerance,
            "max_deviation": self.max_deviation,
            "warnings": self.warnings,
        }


def _activation_doc(module: nn.Module, where: str):
    if isinstance(module, nn.ReLU):
        return {"name": "relu", "breakpoints": [0.0], "slopes": [0.0, 1.0],
                "intercepts": [0.0, 0.0]}, "relu"
    if isinstance(module, nn.LeakyReLU):
        slope = float(module.negative_slope)
        return {"name": "leaky_relu", "breakpoints": [0.0],
                "slopes": [slope, 1.0], "intercepts": [0.0, 0.0]}, \
            f"leaky_relu({slope})"
    if isinstance(module, nn.Hardtanh):
        if module.min_val != -1.0 or module.max_val != 1.0:
            raise UnsupportedLayerError(
                f"{where}: Hardtanh bounds ({module.min_val}, {module.max_val}) "
                f"are not (-1, 1)"
            )
        return {"name": "hard_tanh", "breakpoints": [-1.0, 1.0],
                "slopes": [0.0, 1.0, 0.0], "intercepts": [-1.0, 0.0, 1.0]}, \
            "hard_tanh"
    if isinstance(module, nn.Identity):
        return {"name": "identity", "breakpoints": [], "slopes": [1.0],
                "intercepts": [0.0]}, "identity"
    raise UnsupportedLayerError(
        f"{where}: unsupported module {type(module).__name__}"
    )


def _tensor(t: torch.Tensor) -> np.ndarray:
    return t.detach().to(torch.float64).cpu().numpy()


def _dense_doc(seq: nn.Sequential, manifest: ExportManifest) -> dict:
    layers = []
    pending_act = None
    linear_indices = [i for i, m in enumerate(seq) if isinstance(m, nn.Linear)]
    if not linear_indices:
        raise UnsupportedLayerError("sequential model has no Linear layer")
    input_dim = seq[linear_indices[0]].in_features
    current: dict | None = None
    for i, module in enumerate(seq):
        where = f"model[{i}]"
        if isinstance(module, nn.Linear):
            if current is not None:
                current["activation"] = pending_act
                layers.append(current)
            pending_act = None
            weight = _tensor(module.weight)
            bias = _tensor(module.bias) if module.bias is not None \
                else np.zeros(weight.shape[0])
            current = {
                "type": "dense",
                "shape": list(weight.shape),
                "weights": [float(v) for v in weight.ravel()],
                "bias": [float(v) for v in bias],
            }
            manifest.layer_map.append((f"{where}:Linear", f"dense[{len(layers)}]"))
        else:
            if current is None:
                raise UnsupportedLayerError(
                    f"{where}: activation before any Linear layer"
                )
            if pending_act is not None:
                raise UnsupportedLayerError(f"{where}: two activations in a row")
            pending_act, label = _activation_doc(module, where)
            manifest.activation_map[where] = label
    current["activation"] = None
    if pending_act is not None:
        current["activation"] = pending_act
    layers.append(current)
    return {"version": 1, "name": "export", "seed": None,
            "input_dim": int(input_dim), "layers": layers}


def _conv_doc(seq: nn.Sequential, input_shape, manifest: ExportManifest) -> dict:
    if input_shape is None:
        raise ValueError("conv exports need input_shape=(C, H, W)")
    layers = []
    pending_act = None
    current: dict | None = None
    for i, module in enumerate(seq):
        where = f"model[{i}]"
        if isinstance(module, nn.Conv2d):
            if module.dilation != (1, 1) or module.groups != 1:
                raise UnsupportedLayerError(
                    f"{where}: dilated or grouped convolutions are unsupported"
                )
            if module.stride[0] != module.stride[1] or \
                    module.padding[0] != module.padding[1]:
                raise UnsupportedLayerError(
                    f"{where}: anisotropic stride/padding is unsupported"
                )
            if current is not None:
                current["activation"] = pending_act
                layers.append(current)
            pending_act = None
            kernel = _tensor(module.weight)
            bias = _tensor(module.bias) if module.bias is not None \
                else np.zeros(kernel.shape[0])
            current = {
                "type": "conv",
                "shape": list(kernel.shape),
                "weights": [float(v) for v in kernel.ravel()],
                "bias": [float(v) for v in bias],
                "stride": int(module.stride[0]),
                "padding": int(module.padding[0]),
            }
            manifest.layer_map.append((f"{where}:Conv2d", f"conv[{len(layers)}]"))
        else:
            if current is None or pending_act is not None:
                raise UnsupportedLayerError(f"{where}: misplaced activation")
            pending_act, label = _activation_doc(module, where)
            manifest.activation_map[where] = label
    current["activation"] = None
    if pending_act is not None:
        current["activation"] = pending_act
    layers.append(current)
    return {"version": 1, "name": "export", "seed": None,
            "input_shape": [int(s) for s in input_shape], "layers": layers}


def _rnn_doc(model: nn.Module, manifest: ExportManifest) -> dict:
    rnn: nn.RNN = model.rnn
    readout: nn.Linear = model.readout
    if rnn.num_layers != 1 or rnn.nonlinearity != "relu" or rnn.bidirectional:
        raise UnsupportedLayerError(
            "model.rnn: only single-layer unidirectional relu RNNs are supported"
        )
    if not rnn.batch_first:
        raise UnsupportedLayerError("model.rnn: batch_first=True is required")
    if readout.bias is not None and bool(torch.any(readout.bias != 0)):
        raise UnsupportedLayerError("model.readout: output bias is unsupported")
    w_ih = _tensor(rnn.weight_ih_l0)           # (h, d_in)
    w_hh = _tensor(rnn.weight_hh_l0)           # (h, h)
    bias = np.zeros(w_hh.shape[0])
    if rnn.bias:
        bias = _tensor(rnn.bias_ih_l0) + _tensor(rnn.bias_hh_l0)
    manifest.layer_map.append(("model.rnn:RNN", "rnn[0]"))
    manifest.layer_map.append(("model.readout:Linear", "rnn[0].v_out"))
    manifest.activation_map["model.rnn"] = "relu"
    relu_doc = {"name": "relu", "breakpoints": [0.0], "slopes": [0.0, 1.0],
                "intercepts": [0.0, 0.0]}
    return {"version": 1, "name": "export", "seed": None,
            "input_dim": int(w_ih.shape[1]),
            "layers": [{
                "type": "rnn",
                "w_rec": {"shape": list(w_hh.shape),
                          "data": [float(v) for v in w_hh.ravel()]},
                "u_in": {"shape": list(w_ih.shape),
                         "data": [float(v) for v in w_ih.ravel()]},
                "v_out": {"shape": list(_tensor(readout.weight).shape),
                          "data": [float(v) for v in _tensor(readout.weight).ravel()]},
                "bias_h": [float(v) for v in bias],
                "activation": relu_doc,
            }]}


def _verification_pairs(model: nn.Module, doc: dict, n_verify: int, seed: int,
                        horizon: int):
    """Inputs plus double-precision torch outputs (the source-side truth)."""
    rng = np.random.default_rng(seed)
    model = model.double().eval()
    kind = doc["layers"][0]["type"]
    record: dict = {}
    with torch.no_grad():
        if kind == "dense":
            xs = rng.normal(size=(n_verify, doc["input_dim"]))
            outs = model(torch.from_numpy(xs)).numpy()
            record.update(inputs=xs, outputs=outs)
        elif kind == "conv":
            shape = tuple(doc["input_shape"])
            xs = rng.normal(size=(n_verify, *shape))
            outs = model(torch.from_numpy(xs)).numpy()
            record.update(inputs=xs, outputs=outs)
        else:  # rnn
            d_in = doc["input_dim"]
            h = len(doc["layers"][0]["bias_h"])
            xs = rng.normal(size=(n_verify, horizon, d_in))
            h0 = rng.normal(size=(n_verify, h))
            seq_out, _ = model.rnn(torch.from_numpy(xs),
                                   torch.from_numpy(h0)[None])
            outs = model.readout(seq_out[:, -1]).numpy()
            record.update(inputs=xs, outputs=outs, h0=h0)
    return record


def _primary_side_outputs(net: NetworkSpec, record: dict) -> np.ndarray:
    if net.kind == "rnn":
        cell = net.layers[0]
        outs = []
        for x_seq, h0 in zip(record["inputs"], record["h0"]):
            _, os, _ = rnn_forward(cell, h0, x_seq)
            outs.append(os[-1])
        return np.asarray(outs)
    outs = []
    for x in record["inputs"]:
        out, _ = forward(net, x)
        outs.append(out.ravel())
    return np.asarray(outs)


def export_checkpoint(src, dst, verify_path=None, n_verify: int = 64,
                      seed: int = 0, input_shape=None, horizon: int = 6,
                      tolerance: float = DEFAULT_TOLERANCE) -> ExportManifest:
    """Export a checkpoint to `dst`, emitting verification vectors alongside.

    `src` is a path to a torch.save'd module or an nn.Module instance. The
    file is only kept if the primary-side reload reproduces the framework
    outputs within the tolerance.
    """
    if isinstance(src, (str, Path)):
        model = torch.load(src, weights_only=False)
        if not isinstance(model, nn.Module):
            raise UnsupportedLayerError(
                f"checkpoint holds {type(model).__name__}; save the full module"
            )
    else:
        model = src

    single_precision = any(p.dtype == torch.float32 for p in model.parameters())
    manifest = ExportManifest(
        source_framework="pytorch",
        source_version=torch.__version__,
        layer_map=[],
        activation_map={},
        n_verify=n_verify,
        tolerance=tolerance,
    )
    if single_precision:
        manifest.warnings.append(
            "source parameters are single precision; verification outputs are "
            "computed in double precision from the cast weights"
        )

    if hasattr(model, "rnn") and hasattr(model, "readout"):
        doc = _rnn_doc(model, manifest)
    elif isinstance(model, nn.Sequential):
        if any(isinstance(m, nn.Conv2d) for m in model):
            doc = _conv_doc(model, input_shape, manifest)
        else:
            doc = _dense_doc(model, manifest)
    else:
        raise UnsupportedLayerError(
            f"unsupported model structure {type(model).__name__}"
        )

    record = _verification_pairs(model, doc, n_verify, seed, horizon)

    dst = Path(dst)
    with open(dst, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    try:
        net = load_network(dst)
        ours = _primary_side_outputs(net, record)
        target = record["outputs"].reshape(ours.shape)
        deviation = float(np.max(np.abs(ours - target) / (1.0 + np.abs(target))))
        manifest.max_deviation = deviation
        if deviation > tolerance:
            raise ExportCheckFailed(
                f"reloaded network deviates {deviation:.3e} from framework "
                f"outputs (tolerance {tolerance:.1e})"
            )
    except Exception:
        dst.unlink(missing_ok=True)
        raise

    if verify_path is not None:
        vec_doc = {
            "framework": manifest.source_framework,
            "version": manifest.source_version,
            "count": n_verify,
            "tolerance": tolerance,
            "inputs": record["inputs"].tolist(),
            "outputs": record["outputs"].tolist(),
        }
        if "h0" in record:
            vec_doc["h0"] = record["h0"].tolist()
        if input_shape is not None:
            vec_doc["input_shape"] = [int(s) for s in input_shape]
        with open(verify_path, "w") as fh:
            json.dump(vec_doc, fh, indent=2)
            fh.write("\n")
    return manifest


def check_against_vectors(weights_path, vectors_path) -> float:
    """Load exported weights on the primary side and replay the verification
    vectors; returns the max relative deviation."""
    net = load_network(weights_path)
    with open(vectors_path) as fh:
        vec = json.load(fh)
    record = {"inputs": np.asarray(vec["inputs"]),
              "outputs": np.asarray(vec["outputs"])}
    if "h0" in vec:
        record["h0"] = np.asarray(vec["h0"])
    ours = _primary_side_outputs(net, record)
    target = record["outputs"].reshape(ours.shape)
    return float(np.max(np.abs(ours - target) / (1.0 + np.abs(target))))
