"""Effective-matrix algebra.

Given the region pattern chosen at every activation a network becomes affine,
and the composed map can be applied directly to the augmented input [x; 1].
This module builds those composed maps one masked layer at a time, exposes a
lazy evaluator that walks only the decision path an input actually takes, and
packages the per-stage bookkeeping (a StageProgram) that the tree builder
replays. Lazy evaluation and tree evaluation share the row-application helpers
here, so the two routes produce bitwise-identical arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import PwlActivation, breakpoint_comparisons, region_of
from .layers import DenseLayer, DimensionError, ResidualBlock, RnnCell
from .network import NetworkSpec


@dataclass
class Counters:
    """Operation tallies for one evaluation path."""

    comparisons: int = 0
    multiplies: int = 0
    additions: int = 0

    def as_dict(self) -> dict:
        return {
            "comparisons": self.comparisons,
            "multiplies": self.multiplies,
            "additions": self.additions,
        }


def augmented(weights: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """[[W, b], [0, 1]]: the homogeneous form of an affine layer."""
    d_out, d_in = weights.shape
    out = np.zeros((d_out + 1, d_in + 1))
    out[:-1, :-1] = weights
    if bias is not None:
        out[:-1, -1] = bias
    out[-1, -1] = 1.0
    return out


def mask_weights(
    w: np.ndarray, pattern: np.ndarray, act: PwlActivation
) -> tuple[np.ndarray, np.ndarray]:
    """Scale column j of w by the slope of region pattern[j].

    Also returns w applied to the per-region intercepts; callers add that into
    the homogeneous bias column so non-zero-intercept activations stay exact.
    """
    w = np.asarray(w, dtype=np.float64)
    pattern = np.asarray(pattern, dtype=np.int64)
    if w.ndim != 2 or w.shape[1] != pattern.size:
        raise DimensionError(
            f"pattern length {pattern.size} does not match weight columns {w.shape}"
        )
    masked = w * act.slopes[pattern][None, :]
    intercept_contribution = w @ act.intercepts[pattern]
    return masked, intercept_contribution


def masked_layer_matrix(
    w: np.ndarray, b: np.ndarray, act: PwlActivation, pattern: np.ndarray
) -> np.ndarray:
    """Augmented (W followed-by-activation) factor: [[W*slopes, b + W@intercepts], [0, 1]]."""
    masked, ic = mask_weights(w, pattern, act)
    return augmented(masked, b + ic)


def mask_rows(e: np.ndarray, act: PwlActivation, pattern: np.ndarray) -> np.ndarray:
    """Turn a pre-activation effective matrix into the post-activation one."""
    out = e.copy()
    out[:-1] *= act.slopes[pattern][:, None]
    out[:-1, -1] += act.intercepts[pattern]
    return out


def residual_step_matrix(block: ResidualBlock, pattern: np.ndarray) -> np.ndarray:
    """Augmented single-block map: identity plus the slope-masked block weights."""
    masked, ic = mask_weights(block.weights, pattern, block.activation)
    out = augmented(np.eye(block.width) + masked, ic)
    return out


@dataclass(eq=False)
class Stage:
    """One activation site: where decisions happen during compilation."""

    layer_index: int
    width: int
    activation: PwlActivation
    kind: str  # "dense" | "residual" | "rnn"
    # For dense stages, fused[0] is the (W, b) of the next dense layer, column-
    # masked together with this stage's slopes; remaining entries (and all
    # entries for residual stages) are applied as plain augmented factors.
    fused: tuple[np.ndarray, np.ndarray] | None = None
    post: list[np.ndarray] = field(default_factory=list)
    block: ResidualBlock | None = None

    @property
    def decides(self) -> bool:
        return self.activation.num_regions > 1


class StageProgram:
    """A network compiled to an initial effective matrix plus decision stages.

    `initial()` returns the pre-activation effective matrix of the first stage
    (or the final output map when there are no stages). `advance` consumes one
    stage's pattern and yields the next stage's pre-activation matrix; the last
    advance yields the final output map. All matrices carry the homogeneous
    [0 ... 0 1] last row.
    """

    def __init__(self, input_dim: int, output_dim: int, stages: list[Stage],
                 initial_matrix: np.ndarray):
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.stages = stages
        self._initial = initial_matrix

    def initial(self) -> np.ndarray:
        return self._initial

    def advance(self, stage_idx: int, e: np.ndarray, pattern: np.ndarray) -> np.ndarray:
        stage = self.stages[stage_idx]
        if stage.kind == "dense":
            if stage.fused is not None:
                w, b = stage.fused
                e = masked_layer_matrix(w, b, stage.activation, pattern) @ e
            else:
                e = mask_rows(e, stage.activation, pattern)
        elif stage.kind == "residual":
            e = residual_step_matrix(stage.block, pattern) @ e
        else:
            raise ValueError(f"unknown stage kind {stage.kind!r}")
        for mat in stage.post:
            e = mat @ e
        return e

    def decision_widths(self) -> list[int]:
        return [s.width for s in self.stages if s.decides]

    def region_counts(self) -> list[int]:
        return [s.activation.num_regions for s in self.stages if s.decides]

    def leaf_count(self) -> int:
        total = 1
        for s in self.stages:
            if s.decides:
                total *= s.activation.num_regions ** s.width
        return total

    def expand_categorization(self, c, upto: int | None = None) -> list[np.ndarray]:
        """Align a categorization vector with stages, synthesizing the all-zero
        pattern for single-region stages."""
        n = len(self.stages) if upto is None else upto
        full = []
        ci = 0
        for stage in self.stages[:n]:
            if stage.decides:
                if ci >= len(c):
                    raise ValueError(
                        f"categorization has {len(c)} patterns but stage "
                        f"{stage.layer_index} needs one"
                    )
                p = np.asarray(c[ci], dtype=np.int64).ravel()
                ci += 1
                if p.size != stage.width:
                    raise DimensionError(
                        f"pattern {ci - 1} has length {p.size}, stage width is {stage.width}"
                    )
                if p.size and (p.min() < 0 or p.max() >= stage.activation.num_regions):
                    raise ValueError(f"pattern {ci - 1} holds out-of-range region indices")
            else:
                p = np.zeros(stage.width, dtype=np.int64)
            full.append(p)
        if ci != len(c):
            raise ValueError(f"categorization has {len(c) - ci} unused patterns")
        return full


def compile_network(net: NetworkSpec) -> StageProgram:
    """Compile dense/residual networks into a StageProgram.

    Convolutional networks are lowered first (see convnet.lower_network);
    recurrent cells unroll through rnn.compile_rnn.
    """
    if net.kind == "conv":
        from .convnet import lower_network

        lowered, _ = lower_network(net)
        return compile_network(lowered)
    if net.kind == "rnn":
        raise ValueError("recurrent cells compile through rnn.compile_rnn(cell, horizon)")
    if net.homogeneous:
        raise ValueError("networks are compiled in original form, not bias-augmented")

    layers = net.layers
    initial = augmented(np.eye(net.input_dim))
    stages: list[Stage] = []
    i = 0
    # linear prefix before the first decision
    while i < len(layers) and isinstance(layers[i], DenseLayer) and (
        layers[i].activation is None
    ):
        initial = augmented(layers[i].weights, layers[i].bias) @ initial
        i += 1
    if i < len(layers) and isinstance(layers[i], DenseLayer):
        initial = augmented(layers[i].weights, layers[i].bias) @ initial

    while i < len(layers):
        layer = layers[i]
        if isinstance(layer, DenseLayer):
            stage = Stage(
                layer_index=i, width=layer.d_out, activation=layer.activation, kind="dense"
            )
        else:
            stage = Stage(
                layer_index=i, width=layer.width, activation=layer.activation,
                kind="residual", block=layer,
            )
        # absorb the linear pipeline up to (and including) the next activated
        # dense layer, stopping short of the next residual block
        j = i + 1
        post: list[np.ndarray] = []
        fused = None
        while j < len(layers) and isinstance(layers[j], DenseLayer):
            nxt = layers[j]
            if stage.kind == "dense" and fused is None and not post:
                fused = (nxt.weights, nxt.bias)
            else:
                post.append(augmented(nxt.weights, nxt.bias))
            if nxt.activation is not None:
                break
            j += 1
        stage.fused = fused
        stage.post = post
        stages.append(stage)
        i = j
    return StageProgram(net.input_dim, net.output_dim, stages, initial)


@dataclass(eq=False)
class EffectiveMatrix:
    """Composed affine map from the augmented input to one layer's pre-activation."""

    matrix: np.ndarray
    layer_index: int
    category: tuple[tuple[int, ...], ...]

    def apply(self, x0: np.ndarray) -> np.ndarray:
        x_aug = np.append(np.asarray(x0, dtype=np.float64), 1.0)
        return self.matrix[:-1] @ x_aug


def effective_matrix(net: NetworkSpec, c, layer_index: int) -> EffectiveMatrix:
    """Effective matrix of `layer_index` under categorization c (patterns for
    the deciding stages of all earlier layers)."""
    program = compile_network(net)
    upto = sum(1 for s in program.stages if s.layer_index < layer_index)
    patterns = program.expand_categorization(c, upto=upto)
    e = program.initial()
    for s, p in enumerate(patterns):
        e = program.advance(s, e, p)
    return EffectiveMatrix(matrix=e, layer_index=layer_index, category=_as_category(c))


def _as_category(c) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(v) for v in np.asarray(p).ravel()) for p in c)


def residual_effective(net: NetworkSpec, c, blocks: int | None = None) -> EffectiveMatrix:
    """Effective matrix after `blocks` residual steps (all of them by default);
    c supplies one pattern per multi-region block consumed."""
    if net.kind != "residual":
        raise ValueError("residual_effective expects a residual network")
    program = compile_network(net)
    upto = len(program.stages) if blocks is None else blocks
    patterns = program.expand_categorization(c, upto=upto)
    e = program.initial()
    for s, p in enumerate(patterns):
        e = program.advance(s, e, p)
    layer_index = program.stages[upto - 1].layer_index if upto else 0
    return EffectiveMatrix(matrix=e, layer_index=layer_index, category=_as_category(c))


def apply_filter_row(row: np.ndarray, x_aug: np.ndarray, cost: Counters | None = None) -> float:
    """One oblique-rule evaluation; counted as row-length multiplies and
    row-length-minus-one additions."""
    if cost is not None:
        cost.multiplies += row.size
        cost.additions += row.size - 1
    return float(row @ x_aug)


def apply_affine(matrix: np.ndarray, x_aug: np.ndarray, cost: Counters | None = None) -> np.ndarray:
    """Apply an effective matrix (homogeneous row excluded) to an augmented input."""
    body = matrix[:-1]
    if cost is not None:
        cost.multiplies += body.size
        cost.additions += body.shape[0] * (body.shape[1] - 1)
    return body @ x_aug


@dataclass(eq=False)
class LazyResult:
    output: np.ndarray
    categorization: tuple[tuple[int, ...], ...]
    cost: Counters


def lazy_eval(net_or_program, x0) -> LazyResult:
    """Evaluate by walking the decision path only (no tree materialization).

    Matches the reference forward pass within reassociation error and its
    trace exactly; the returned counters tally the comparisons, multiplies and
    additions of the path actually taken.
    """
    program = net_or_program if isinstance(net_or_program, StageProgram) \
        else compile_network(net_or_program)
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    if x0.size != program.input_dim:
        raise DimensionError(f"input length {x0.size} != expected {program.input_dim}")
    x_aug = np.append(x0, 1.0)
    cost = Counters()
    e = program.initial()
    categorization: list[tuple[int, ...]] = []
    for s, stage in enumerate(program.stages):
        if stage.decides:
            k = stage.activation.num_regions
            pattern = np.empty(stage.width, dtype=np.int64)
            for u in range(stage.width):
                z = apply_filter_row(e[u], x_aug, cost)
                r = int(region_of(z, stage.activation.breakpoints))
                cost.comparisons += breakpoint_comparisons(k, r)
                pattern[u] = r
            categorization.append(tuple(int(v) for v in pattern))
        else:
            pattern = np.zeros(stage.width, dtype=np.int64)
        e = program.advance(s, e, pattern)
    output = apply_affine(e, x_aug, cost)
    return LazyResult(output=output, categorization=tuple(categorization), cost=cost)
