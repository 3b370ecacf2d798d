"""From-scratch training of dense networks by mini-batch gradient descent.

Deliberately plain: fixed learning rate, seeded shuffling, no momentum or
scheduling, so a (seed, config) pair reproduces weights bit for bit. The
activation derivative at a point is the slope of whatever region the shared
region-selection routine picks, which keeps training consistent with
inference at breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import PwlActivation, region_of
from .datasets import Dataset
from .layers import DenseLayer
from .network import NetworkSpec


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 2000
    batch_size: int = 64
    learning_rate: float = 0.02
    seed: int = 0
    loss: str = "mse"  # "mse" | "bce" (bce applies a sigmoid to the raw output)
    log_every: int = 0

    def __post_init__(self):
        if self.epochs <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs and learning_rate must be positive")
        if self.loss not in ("mse", "bce"):
            raise ValueError(f"unknown loss {self.loss!r}")


def init_dense_network(dims: list[int], activation: PwlActivation, seed: int,
                       name: str = "") -> NetworkSpec:
    """He-style normal init for a dense stack; the final layer is linear."""
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(dims) - 1):
        d_in, d_out = dims[i], dims[i + 1]
        w = rng.normal(scale=np.sqrt(2.0 / d_in), size=(d_out, d_in))
        b = np.zeros(d_out)
        act = activation if i < len(dims) - 2 else None
        layers.append(DenseLayer(weights=w, bias=b, activation=act))
    return NetworkSpec(layers=layers, input_dim=dims[0], name=name, seed=seed)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _batch_forward(layers: list[DenseLayer], x: np.ndarray):
    """x is (n, d_in); returns per-layer pre-activations and activations."""
    pre, post = [], [x]
    for layer in layers:
        z = post[-1] @ layer.weights.T + layer.bias
        pre.append(z)
        if layer.activation is not None:
            r = region_of(z, layer.activation.breakpoints)
            post.append(layer.activation.slopes[r] * z + layer.activation.intercepts[r])
        else:
            post.append(z)
    return pre, post


def batch_predict(net: NetworkSpec, x: np.ndarray) -> np.ndarray:
    return _batch_forward(net.layers, np.asarray(x, dtype=np.float64))[1][-1]


def mse_loss(net: NetworkSpec, data: Dataset) -> float:
    pred = batch_predict(net, data.inputs)
    return float(np.mean((pred - data.targets) ** 2))


def bce_loss(net: NetworkSpec, data: Dataset) -> float:
    p = _sigmoid(batch_predict(net, data.inputs))
    p = np.clip(p, 1e-12, 1 - 1e-12)
    y = data.targets
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def accuracy(net: NetworkSpec, data: Dataset) -> float:
    pred = batch_predict(net, data.inputs) >= 0.0
    return float(np.mean(pred == (data.targets >= 0.5)))


def train(net: NetworkSpec, data: Dataset, cfg: TrainConfig
          ) -> tuple[NetworkSpec, list[float]]:
    """Train a copy of the network; returns (trained network, loss curve)."""
    if net.kind != "dense":
        raise ValueError("training supports dense networks")
    if data.inputs.shape[1] != net.input_dim:
        raise ValueError(
            f"dataset dimension {data.inputs.shape[1]} != input_dim {net.input_dim}"
        )
    layers = [DenseLayer(l.weights.copy(), l.bias.copy(), l.activation)
              for l in net.layers]
    rng = np.random.default_rng(cfg.seed)
    n = len(data)
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x, y = data.inputs[idx], data.targets[idx]
            # overflow after divergence is expected; the finiteness check
            # on the epoch loss reports it
            with np.errstate(over="ignore", invalid="ignore"):
                pre, post = _batch_forward(layers, x)
                out = post[-1]
                if cfg.loss == "mse":
                    grad = 2.0 * (out - y) / out.size
                else:
                    grad = (_sigmoid(out) - y) / len(idx)
                for i in reversed(range(len(layers))):
                    layer = layers[i]
                    if layer.activation is not None:
                        r = region_of(pre[i], layer.activation.breakpoints)
                        grad = grad * layer.activation.slopes[r]
                    gw = grad.T @ post[i]
                    gb = grad.sum(axis=0)
                    if i > 0:
                        grad = grad @ layer.weights
                    layer.weights -= cfg.learning_rate * gw
                    layer.bias -= cfg.learning_rate * gb
        trained = NetworkSpec(layers=layers, input_dim=net.input_dim,
                              name=net.name, seed=net.seed)
        with np.errstate(over="ignore", invalid="ignore"):
            loss = mse_loss(trained, data) if cfg.loss == "mse" else bce_loss(trained, data)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} at epoch {epoch}")
        curve.append(loss)
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            print(f"epoch {epoch + 1}: loss {loss:.6f}")
    return NetworkSpec(layers=layers, input_dim=net.input_dim,
                       name=net.name, seed=net.seed), curve
