"""Network container and the reference forward pass.

The forward pass here is the ground truth every compiled representation is
checked against: dense and residual layers evaluate step by step, convolutions
evaluate by direct cross-correlation (no lowering), and every activation
decision is recorded in an ActivationTrace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import PwlActivation, region_of
from .layers import ConvLayer, DenseLayer, DimensionError, ResidualBlock, RnnCell


@dataclass(eq=False)
class ActivationTrace:
    """Region indices chosen at each activation site, one array per activated layer.

    Dense/residual layers contribute a 1-D integer array per layer; conv layers
    contribute a (C_out, H_out, W_out) array per layer; the recurrent helpers
    produce one array per time step.
    """

    patterns: list[np.ndarray] = field(default_factory=list)

    def append(self, regions: np.ndarray) -> None:
        self.patterns.append(np.asarray(regions, dtype=np.int64))

    def categorization(self) -> tuple[tuple[int, ...], ...]:
        """Flatten to the hashable categorization vector (row-major per layer)."""
        return tuple(tuple(int(r) for r in p.ravel()) for p in self.patterns)

    def __eq__(self, other):
        if not isinstance(other, ActivationTrace):
            return NotImplemented
        return self.categorization() == other.categorization()

    def __len__(self):
        return len(self.patterns)


@dataclass(eq=False)
class NetworkSpec:
    """An ordered stack of layers plus its declared input size.

    Dense/residual networks declare input_dim; convolutional networks declare
    input_shape (C, H, W). Instances are treated as immutable after
    construction; evaluation never mutates them.
    """

    layers: list
    input_dim: int | None = None
    input_shape: tuple[int, int, int] | None = None
    name: str = ""
    seed: int | None = None
    homogeneous: bool = False  # set by augment_bias: last unit carries the constant 1

    def __post_init__(self):
        if (self.input_dim is None) == (self.input_shape is None):
            raise ValueError("declare exactly one of input_dim or input_shape")
        if self.input_shape is not None:
            self.input_shape = tuple(int(s) for s in self.input_shape)
        if not self.layers:
            raise ValueError("network needs at least one layer")
        self._validate_chain()

    def _validate_chain(self):
        kinds = {type(l) for l in self.layers}
        if RnnCell in kinds:
            if len(self.layers) != 1:
                raise ValueError("a recurrent network holds exactly one cell")
            cell = self.layers[0]
            if self.input_dim != cell.d_in:
                raise DimensionError(
                    f"input_dim {self.input_dim} != cell input size {cell.d_in}"
                )
            return
        if ConvLayer in kinds:
            if kinds != {ConvLayer}:
                raise ValueError("convolutional networks must be all-conv")
            if self.input_shape is None:
                raise ValueError("convolutional networks declare input_shape")
            shape = self.input_shape
            for i, layer in enumerate(self.layers):
                try:
                    shape = layer.out_shape(shape)
                except DimensionError as e:
                    raise DimensionError(f"layers[{i}]: {e}") from None
                if layer.activation is None and i != len(self.layers) - 1:
                    raise ValueError(f"layers[{i}]: only the final layer may be unactivated")
            return
        width = self.input_dim
        for i, layer in enumerate(self.layers):
            if isinstance(layer, DenseLayer):
                if layer.d_in != width:
                    source = f"layers[{i - 1}] outputs" if i else "input_dim is"
                    raise DimensionError(
                        f"layers[{i}] expects {layer.d_in} inputs but {source} {width}"
                    )
                width = layer.d_out
                last = i == len(self.layers) - 1
                next_residual = (not last) and isinstance(self.layers[i + 1], ResidualBlock)
                if layer.activation is None and not (last or next_residual):
                    raise ValueError(f"layers[{i}]: only the final layer may be unactivated")
            elif isinstance(layer, ResidualBlock):
                if layer.width != width:
                    raise DimensionError(
                        f"layers[{i}] residual width {layer.width} != incoming width {width}"
                    )
            else:
                raise TypeError(f"layers[{i}]: unsupported layer type {type(layer).__name__}")

    @property
    def kind(self) -> str:
        if isinstance(self.layers[0], RnnCell):
            return "rnn"
        if isinstance(self.layers[0], ConvLayer):
            return "conv"
        if any(isinstance(l, ResidualBlock) for l in self.layers):
            return "residual"
        return "dense"

    @property
    def output_dim(self) -> int:
        last = self.layers[-1]
        if isinstance(last, DenseLayer):
            return last.d_out
        if isinstance(last, ResidualBlock):
            return last.width
        if isinstance(last, RnnCell):
            return last.d_out
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.out_shape(shape)
        return int(np.prod(shape))

    def decision_widths(self) -> list[int]:
        """Units deciding a region per activation stage, in evaluation order.

        Single-region (pure linear) activations make no decisions and are
        skipped, matching the trace convention.
        """
        widths = []
        for layer in self.layers:
            if isinstance(layer, DenseLayer):
                if layer.activation is not None and layer.activation.num_regions > 1:
                    widths.append(layer.d_out)
            elif isinstance(layer, ResidualBlock):
                if layer.activation.num_regions > 1:
                    widths.append(layer.width)
        return widths


def _activate(act: PwlActivation, z: np.ndarray, skip_last: bool) -> tuple[np.ndarray, np.ndarray]:
    """Apply an activation, returning (output, regions). skip_last leaves the
    homogeneous unit untouched on bias-augmented networks."""
    if skip_last:
        body, hom = z[:-1], z[-1]
        r = region_of(body, act.breakpoints)
        out = np.concatenate([act.slopes[r] * body + act.intercepts[r], [hom]])
        return out, r
    r = region_of(z, act.breakpoints)
    return act.slopes[r] * z + act.intercepts[r], r


def direct_conv2d(f: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Plain-loop 2-D cross-correlation; the independent conv reference."""
    c_out, h_out, w_out = layer.out_shape(f.shape)
    p = layer.padding
    if p:
        f = np.pad(f, ((0, 0), (p, p), (p, p)))
    kh, kw = layer.kernel.shape[2], layer.kernel.shape[3]
    out = np.empty((c_out, h_out, w_out))
    for co in range(c_out):
        for y in range(h_out):
            for x in range(w_out):
                patch = f[:, y * layer.stride:y * layer.stride + kh,
                          x * layer.stride:x * layer.stride + kw]
                out[co, y, x] = np.sum(layer.kernel[co] * patch) + layer.bias[co]
    return out


def forward(net: NetworkSpec, x0) -> tuple[np.ndarray, ActivationTrace]:
    """Reference layer-by-layer evaluation returning output and region trace."""
    trace = ActivationTrace()
    if net.kind == "conv":
        f = np.asarray(x0, dtype=np.float64)
        if f.shape != net.input_shape:
            raise DimensionError(f"input shape {f.shape} != declared {net.input_shape}")
        for layer in net.layers:
            z = direct_conv2d(f, layer)
            if layer.activation is not None:
                r = region_of(z, layer.activation.breakpoints)
                if layer.activation.num_regions > 1:
                    trace.append(r)
                f = layer.activation.slopes[r] * z + layer.activation.intercepts[r]
            else:
                f = z
        return f, trace
    if net.kind == "rnn":
        raise ValueError("recurrent networks are evaluated with rnn_forward")

    x = np.asarray(x0, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise DimensionError(f"input length {x.shape} != declared ({net.input_dim},)")
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            z = layer.weights @ x + layer.bias
            if layer.activation is not None:
                x, r = _activate(layer.activation, z, net.homogeneous)
                if layer.activation.num_regions > 1:
                    trace.append(r)
            else:
                x = z
        else:  # ResidualBlock
            act_in = x[:-1] if net.homogeneous else x
            r = region_of(act_in, layer.activation.breakpoints)
            if layer.activation.num_regions > 1:
                trace.append(r)
            sigma = layer.activation.slopes[r] * act_in + layer.activation.intercepts[r]
            if net.homogeneous:
                sigma = np.concatenate([sigma, [x[-1]]])
            x = x + layer.weights @ sigma
    return x, trace


def augment_bias(net: NetworkSpec) -> NetworkSpec:
    """Fold biases into homogeneous coordinates.

    The returned network takes [x; 1] and produces [output; 1]: every dense
    weight matrix gains its bias as a final column plus a [0 ... 0 1] row, and
    residual blocks are zero-padded so the constant coordinate rides through.
    """
    aug_layers = []
    for layer in net.layers:
        if isinstance(layer, DenseLayer):
            w = np.zeros((layer.d_out + 1, layer.d_in + 1))
            w[:-1, :-1] = layer.weights
            w[:-1, -1] = layer.bias
            w[-1, -1] = 1.0
            aug_layers.append(
                DenseLayer(weights=w, bias=np.zeros(layer.d_out + 1), activation=layer.activation)
            )
        elif isinstance(layer, ResidualBlock):
            w = np.zeros((layer.width + 1, layer.width + 1))
            w[:-1, :-1] = layer.weights
            aug_layers.append(ResidualBlock(weights=w, activation=layer.activation))
        else:
            raise ValueError("bias augmentation applies to dense/residual networks only")
    return NetworkSpec(
        layers=aug_layers,
        input_dim=net.input_dim + 1,
        name=net.name,
        seed=net.seed,
        homogeneous=True,
    )
