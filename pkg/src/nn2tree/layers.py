"""Layer types: dense, residual block, convolution, recurrent cell, normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import PwlActivation


class DimensionError(ValueError):
    """Raised when array shapes do not chain or match a declared size."""


def _as_matrix(x, name) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def _as_vector(x, name) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {a.shape}")
    return a


@dataclass(eq=False)
class DenseLayer:
    """Affine map z = W x + b with rows of W as output units."""

    weights: np.ndarray  # (d_out, d_in)
    bias: np.ndarray     # (d_out,)
    activation: PwlActivation | None

    def __post_init__(self):
        self.weights = _as_matrix(self.weights, "weights")
        self.bias = _as_vector(self.bias, "bias")
        if self.bias.size != self.weights.shape[0]:
            raise DimensionError(
                f"bias length {self.bias.size} != output width {self.weights.shape[0]}"
            )

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[0]


@dataclass(eq=False)
class ResidualBlock:
    """Skip-connected update x <- x + W @ act(x); the activation sees the block input."""

    weights: np.ndarray  # (d, d)
    activation: PwlActivation

    def __post_init__(self):
        self.weights = _as_matrix(self.weights, "weights")
        if self.weights.shape[0] != self.weights.shape[1]:
            raise DimensionError(f"residual weights must be square, got {self.weights.shape}")
        if self.activation is None:
            raise ValueError("residual block requires an activation")

    @property
    def width(self) -> int:
        return self.weights.shape[0]


@dataclass(eq=False)
class ConvLayer:
    """2-D cross-correlation with kernel (C_out, C_in, KH, KW)."""

    kernel: np.ndarray
    bias: np.ndarray  # (C_out,)
    stride: int = 1
    padding: int = 0
    activation: PwlActivation | None = None

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        if self.kernel.ndim != 4:
            raise DimensionError(f"kernel must be 4-D, got shape {self.kernel.shape}")
        if self.kernel.shape[2] < 1 or self.kernel.shape[3] < 1:
            raise DimensionError("kernel spatial dims must be >= 1")
        self.bias = _as_vector(self.bias, "bias")
        if self.bias.size != self.kernel.shape[0]:
            raise DimensionError(
                f"bias length {self.bias.size} != output channels {self.kernel.shape[0]}"
            )
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")

    @property
    def c_out(self) -> int:
        return self.kernel.shape[0]

    @property
    def c_in(self) -> int:
        return self.kernel.shape[1]

    def out_shape(self, in_shape: tuple[int, int, int]) -> tuple[int, int, int]:
        c, h, w = in_shape
        if c != self.c_in:
            raise DimensionError(f"input has {c} channels, kernel expects {self.c_in}")
        kh, kw = self.kernel.shape[2], self.kernel.shape[3]
        h_out = (h + 2 * self.padding - kh) // self.stride + 1
        w_out = (w + 2 * self.padding - kw) // self.stride + 1
        if h_out < 1 or w_out < 1:
            raise DimensionError(
                f"kernel {kh}x{kw} with stride {self.stride}, padding {self.padding} "
                f"yields empty output for input {h}x{w}"
            )
        return self.c_out, h_out, w_out


@dataclass(eq=False)
class RnnCell:
    """Recurrence h_t = act(w_rec h_{t-1} + u_in x_t + bias_h), o_t = v_out h_t."""

    w_rec: np.ndarray   # (h, h)
    u_in: np.ndarray    # (h, d_in)
    v_out: np.ndarray   # (d_out, h)
    bias_h: np.ndarray  # (h,)
    activation: PwlActivation

    def __post_init__(self):
        self.w_rec = _as_matrix(self.w_rec, "w_rec")
        self.u_in = _as_matrix(self.u_in, "u_in")
        self.v_out = _as_matrix(self.v_out, "v_out")
        self.bias_h = _as_vector(self.bias_h, "bias_h")
        h = self.w_rec.shape[0]
        if self.w_rec.shape[1] != h:
            raise DimensionError(f"w_rec must be square, got {self.w_rec.shape}")
        if self.u_in.shape[0] != h:
            raise DimensionError(f"u_in rows {self.u_in.shape[0]} != hidden size {h}")
        if self.v_out.shape[1] != h:
            raise DimensionError(f"v_out cols {self.v_out.shape[1]} != hidden size {h}")
        if self.bias_h.size != h:
            raise DimensionError(f"bias_h length {self.bias_h.size} != hidden size {h}")

    @property
    def hidden_size(self) -> int:
        return self.w_rec.shape[0]

    @property
    def d_in(self) -> int:
        return self.u_in.shape[1]

    @property
    def d_out(self) -> int:
        return self.v_out.shape[0]


@dataclass(eq=False)
class NormalizationSpec:
    """Trained normalization y = scale * (x - mean) / sqrt(var + eps) + shift."""

    scale: np.ndarray
    shift: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        self.scale = _as_vector(self.scale, "scale")
        self.shift = _as_vector(self.shift, "shift")
        self.running_mean = _as_vector(self.running_mean, "running_mean")
        self.running_var = _as_vector(self.running_var, "running_var")
        sizes = {v.size for v in (self.scale, self.shift, self.running_mean, self.running_var)}
        if len(sizes) != 1:
            raise DimensionError("normalization vectors must share one length")
        if np.any(self.running_var + self.epsilon <= 0.0):
            raise ValueError("running_var + epsilon must be positive elementwise")

    @property
    def width(self) -> int:
        return self.scale.size

    def gain_and_offset(self) -> tuple[np.ndarray, np.ndarray]:
        g = self.scale / np.sqrt(self.running_var + self.epsilon)
        return g, self.shift - g * self.running_mean


def fold_normalization(layer: DenseLayer, norm: NormalizationSpec, position: str) -> DenseLayer:
    """Absorb a normalization into an adjacent dense layer.

    position="post": returned layer computes norm(layer(x)).
    position="pre":  returned layer computes layer(norm(x)).
    """
    g, h = norm.gain_and_offset()
    if position == "post":
        if norm.width != layer.d_out:
            raise DimensionError(
                f"normalization width {norm.width} != layer output width {layer.d_out}"
            )
        w = g[:, None] * layer.weights
        b = g * layer.bias + h
    elif position == "pre":
        if norm.width != layer.d_in:
            raise DimensionError(
                f"normalization width {norm.width} != layer input width {layer.d_in}"
            )
        w = layer.weights * g[None, :]
        b = layer.bias + layer.weights @ h
    else:
        raise ValueError(f"position must be 'pre' or 'post', got {position!r}")
    return DenseLayer(weights=w, bias=b, activation=layer.activation)
