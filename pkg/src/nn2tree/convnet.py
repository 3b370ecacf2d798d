"""Convolution lowering: compile conv stacks to dense operators at a fixed size.

Each conv layer becomes the dense matrix that performs the same cross-
correlation on the flattened input, after which every per-region bookkeeping
question reduces to the dense effective-matrix machinery. Units are ordered
channel-major, row-major within a channel, matching ndarray.ravel().
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effective import Counters, apply_affine, compile_network, effective_matrix, lazy_eval
from .layers import ConvLayer, DenseLayer, DimensionError
from .network import NetworkSpec

RECEPTIVE_FIELD_TOL = 1e-12


def lower_conv_layer(layer: ConvLayer, in_shape: tuple[int, int, int]
                     ) -> tuple[DenseLayer, tuple[int, int, int]]:
    """Unroll one conv layer into its dense equivalent on flattened tensors."""
    c_in, h_in, w_in = in_shape
    out_shape = layer.out_shape(in_shape)
    c_out, h_out, w_out = out_shape
    kh, kw = layer.kernel.shape[2], layer.kernel.shape[3]
    weights = np.zeros((c_out * h_out * w_out, c_in * h_in * w_in))
    bias = np.zeros(c_out * h_out * w_out)
    for co in range(c_out):
        for y in range(h_out):
            for x in range(w_out):
                row = (co * h_out + y) * w_out + x
                bias[row] = layer.bias[co]
                for ci in range(c_in):
                    for ky in range(kh):
                        yy = y * layer.stride - layer.padding + ky
                        if yy < 0 or yy >= h_in:
                            continue
                        for kx in range(kw):
                            xx = x * layer.stride - layer.padding + kx
                            if xx < 0 or xx >= w_in:
                                continue
                            col = (ci * h_in + yy) * w_in + xx
                            weights[row, col] = layer.kernel[co, ci, ky, kx]
    return DenseLayer(weights=weights, bias=bias, activation=layer.activation), out_shape


def lower_network(net: NetworkSpec) -> tuple[NetworkSpec, list[tuple[int, int, int]]]:
    """Lower an all-conv network to dense layers; returns the lowered network
    and the feature shapes per layer (input shape first)."""
    if net.kind != "conv":
        raise ValueError("lower_network expects a convolutional network")
    shapes = [net.input_shape]
    dense_layers = []
    for layer in net.layers:
        lowered, out_shape = lower_conv_layer(layer, shapes[-1])
        dense_layers.append(lowered)
        shapes.append(out_shape)
    lowered_net = NetworkSpec(
        layers=dense_layers,
        input_dim=int(np.prod(net.input_shape)),
        name=net.name,
        seed=net.seed,
    )
    return lowered_net, shapes


@dataclass(eq=False)
class ConvLazyResult:
    output: np.ndarray                  # (C, H, W) final feature map
    categorizations: list[np.ndarray]   # per activated layer, (C, H, W) regions
    cost: Counters


def conv_lazy_eval(net: NetworkSpec, f0) -> ConvLazyResult:
    """Lazy evaluation of a conv network via its dense lowering.

    The flat categorization is reshaped back to one region index per output
    channel per spatial position for each activated layer.
    """
    f0 = np.asarray(f0, dtype=np.float64)
    if f0.shape != net.input_shape:
        raise DimensionError(f"input shape {f0.shape} != declared {net.input_shape}")
    lowered, shapes = lower_network(net)
    result = lazy_eval(lowered, f0.ravel())
    cats = []
    pos = 0
    for i, layer in enumerate(net.layers):
        if layer.activation is not None and layer.activation.num_regions > 1:
            cats.append(np.asarray(result.categorization[pos], dtype=np.int64)
                        .reshape(shapes[i + 1]))
            pos += 1
    return ConvLazyResult(
        output=result.output.reshape(shapes[-1]),
        categorizations=cats,
        cost=result.cost,
    )


@dataclass(eq=False)
class ConvEffectiveMap:
    """Effective map from one receptive-field patch to the pre-activation
    channels at a single output position."""

    matrix: np.ndarray           # (C_out, rf_c * rf_h * rf_w + 1), last col constant
    channel_range: tuple[int, int]
    row_range: tuple[int, int]
    col_range: tuple[int, int]

    def apply(self, f0: np.ndarray) -> np.ndarray:
        patch = f0[:, self.row_range[0]:self.row_range[1],
                   self.col_range[0]:self.col_range[1]]
        return self.matrix[:, :-1] @ patch.ravel() + self.matrix[:, -1]


def receptive_field(net: NetworkSpec, layer_index: int, y: int, x: int
                    ) -> tuple[tuple[int, int], tuple[int, int]]:
    """Input rows/cols (clipped, half-open) feeding output position (y, x) of
    the given layer."""
    y0, y1 = y, y + 1
    x0, x1 = x, x + 1
    for layer in reversed(net.layers[:layer_index + 1]):
        kh, kw = layer.kernel.shape[2], layer.kernel.shape[3]
        y0 = y0 * layer.stride - layer.padding
        y1 = (y1 - 1) * layer.stride - layer.padding + kh
        x0 = x0 * layer.stride - layer.padding
        x1 = (x1 - 1) * layer.stride - layer.padding + kw
    _, h_in, w_in = net.input_shape
    return (max(y0, 0), min(y1, h_in)), (max(x0, 0), min(x1, w_in))


def conv_effective_kernel(net: NetworkSpec, categorization, position: tuple[int, int],
                          layer_index: int | None = None) -> ConvEffectiveMap:
    """Effective linear map for one output position under a fixed categorization.

    Computed from the dense lowering, then restricted to the analytical
    receptive field after verifying everything outside it is numerically zero.
    """
    if layer_index is None:
        layer_index = len(net.layers) - 1
    lowered, shapes = lower_network(net)
    c_out, h_out, w_out = shapes[layer_index + 1]
    y, x = position
    if not (0 <= y < h_out and 0 <= x < w_out):
        raise IndexError(f"position {position} outside output grid {h_out}x{w_out}")
    upto = sum(1 for l in net.layers[:layer_index]
               if l.activation is not None and l.activation.num_regions > 1)
    eff = effective_matrix(lowered, tuple(categorization)[:upto], layer_index)
    c_in, h_in, w_in = net.input_shape
    rows = [(c * h_out + y) * w_out + x for c in range(c_out)]
    block = eff.matrix[rows]
    (ry0, ry1), (rx0, rx1) = receptive_field(net, layer_index, y, x)
    inside = np.zeros(c_in * h_in * w_in + 1, dtype=bool)
    inside[-1] = True  # constant column
    for c in range(c_in):
        for yy in range(ry0, ry1):
            start = (c * h_in + yy) * w_in
            inside[start + rx0:start + rx1] = True
    spill = np.max(np.abs(block[:, ~inside])) if (~inside).any() else 0.0
    if spill > RECEPTIVE_FIELD_TOL:
        raise AssertionError(
            f"effective map leaks {spill:.3e} outside the receptive field"
        )
    keep = np.where(inside)[0]
    return ConvEffectiveMap(
        matrix=block[:, keep],
        channel_range=(0, c_in),
        row_range=(ry0, ry1),
        col_range=(rx0, rx1),
    )
