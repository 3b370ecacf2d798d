"""Independent reference implementations used to cross-check the compiler.

Everything here deliberately avoids the package's effective-matrix machinery:
plain recurrences, direct loops and vectorized batch math only. The one thing
shared with the package is the region tie-break (searchsorted side="right"),
which all evaluators must agree on by contract.
"""

import numpy as np

from nn2tree.layers import DenseLayer
from nn2tree.tree import DecisionNode


def batch_forward_dense(net, xs: np.ndarray) -> np.ndarray:
    """Vectorized dense forward pass (no tracing)."""
    x = np.asarray(xs, dtype=np.float64)
    for layer in net.layers:
        z = x @ layer.weights.T + layer.bias
        act = layer.activation
        if act is None:
            x = z
        else:
            r = np.searchsorted(act.breakpoints, z, side="right")
            x = act.slopes[r] * z + act.intercepts[r]
    return x


def categorization_census(net, points: np.ndarray, chunk: int = 500_000) -> set:
    """Distinct activation patterns realized on a point set (dense nets).

    Patterns are packed per point into a byte string per flattened region
    vector; the result is the set of realized categorizations.
    """
    seen: set[bytes] = set()
    points = np.asarray(points, dtype=np.float64)
    for start in range(0, len(points), chunk):
        x = points[start:start + chunk]
        pats = []
        for layer in net.layers:
            z = x @ layer.weights.T + layer.bias
            act = layer.activation
            if act is None:
                x = z
                continue
            r = np.searchsorted(act.breakpoints, z, side="right")
            if act.num_regions > 1:
                pats.append(r.astype(np.int8))
            x = act.slopes[r] * z + act.intercepts[r]
        rows = np.hstack(pats) if pats else np.zeros((len(x), 0), dtype=np.int8)
        seen.update(bytes(row) for row in np.unique(rows, axis=0))
    return seen


def category_bytes(category) -> bytes:
    return bytes(bytearray(v for pattern in category for v in pattern))


def residual_recursion(net, x: np.ndarray) -> np.ndarray:
    """Direct unrolling of the skip recurrence."""
    first = net.layers[0]
    rx = first.weights @ x + first.bias
    for block in net.layers[1:]:
        act = block.activation
        r = np.searchsorted(act.breakpoints, rx, side="right")
        rx = rx + block.weights @ (act.slopes[r] * rx + act.intercepts[r])
    return rx


def rnn_recurrence(cell, h0, xs) -> np.ndarray:
    """Plain recurrent rollout; returns outputs (T, d_out)."""
    h = np.asarray(h0, dtype=np.float64)
    outputs = []
    for x in xs:
        z = cell.w_rec @ h + cell.u_in @ x + cell.bias_h
        act = cell.activation
        r = np.searchsorted(act.breakpoints, z, side="right")
        h = act.slopes[r] * z + act.intercepts[r]
        outputs.append(cell.v_out @ h)
    return np.asarray(outputs)


def conv_reference(net, f0: np.ndarray) -> np.ndarray:
    """Direct convolutional forward with explicit window loops."""
    f = np.asarray(f0, dtype=np.float64)
    for layer in net.layers:
        c_out, h_out, w_out = layer.out_shape(f.shape)
        p = layer.padding
        padded = np.pad(f, ((0, 0), (p, p), (p, p))) if p else f
        kh, kw = layer.kernel.shape[2:]
        z = np.empty((c_out, h_out, w_out))
        for co in range(c_out):
            for y in range(h_out):
                for x in range(w_out):
                    patch = padded[:, y * layer.stride:y * layer.stride + kh,
                                   x * layer.stride:x * layer.stride + kw]
                    z[co, y, x] = float(np.sum(layer.kernel[co] * patch)) + layer.bias[co]
        act = layer.activation
        if act is None:
            f = z
        else:
            r = np.searchsorted(act.breakpoints, z, side="right")
            f = act.slopes[r] * z + act.intercepts[r]
    return f


def step_counting_interpreter(tree, x) -> tuple[int, int, int]:
    """Independent tree walker tallying (comparisons, multiplies, additions)."""
    x_aug = np.append(np.asarray(x, dtype=float), 1.0)
    comparisons = multiplies = additions = 0
    node = tree.root
    while isinstance(node, DecisionNode):
        z = sum(w * v for w, v in zip(node.filter_row, x_aug))
        multiplies += len(node.filter_row)
        additions += len(node.filter_row) - 1
        region = 0
        for t in node.breakpoints:
            comparisons += 1
            if z < t:
                break
            region += 1
        node = node.children[region]
    body = node.final_map[:-1]
    multiplies += body.size
    additions += body.shape[0] * (body.shape[1] - 1)
    return comparisons, multiplies, additions
