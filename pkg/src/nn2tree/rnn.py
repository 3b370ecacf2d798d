"""Recurrent cells: reference recurrence, masked-chain output, and unrolling.

A recurrent cell over a fixed horizon T is a feedforward computation on the
stacked vector [h0; x_1; ...; x_T], which is what compile_rnn exposes to the
lazy evaluator and the tree builder. rnn_effective_output instead computes the
final output directly from the masked matrix chains, one product per time
step, as a second route for equivalence checking.
"""

from __future__ import annotations

import numpy as np

from .activations import region_of
from .effective import Stage, StageProgram, augmented, mask_rows, mask_weights
from .layers import DimensionError, RnnCell
from .network import ActivationTrace


def _check_sequence(cell: RnnCell, h0, xs) -> tuple[np.ndarray, np.ndarray]:
    h0 = np.asarray(h0, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    if h0.shape != (cell.hidden_size,):
        raise DimensionError(f"h0 shape {h0.shape} != ({cell.hidden_size},)")
    if xs.ndim != 2 or xs.shape[1] != cell.d_in:
        raise DimensionError(f"inputs must be (T, {cell.d_in}), got {xs.shape}")
    return h0, xs


def rnn_forward(cell: RnnCell, h0, xs) -> tuple[np.ndarray, np.ndarray, ActivationTrace]:
    """Run the recurrence, returning hidden states (T, h), outputs (T, d_out)
    and the per-step region trace."""
    h0, xs = _check_sequence(cell, h0, xs)
    act = cell.activation
    hs, os = [], []
    trace = ActivationTrace()
    h = h0
    for x in xs:
        z = cell.w_rec @ h + cell.u_in @ x + cell.bias_h
        r = region_of(z, act.breakpoints)
        if act.num_regions > 1:
            trace.append(r)
        h = act.slopes[r] * z + act.intercepts[r]
        hs.append(h)
        os.append(cell.v_out @ h)
    return np.asarray(hs), np.asarray(os), trace


def rnn_effective_output(cell: RnnCell, h0, xs, patterns) -> np.ndarray:
    """Final-step output computed from masked matrix chains alone.

    For each source term (initial hidden state, each step's input, each step's
    intercept) the recurrent weights are slope-masked per the given patterns
    and multiplied down the remaining steps, descending one step at a time
    with the empty product read as the identity.
    """
    h0, xs = _check_sequence(cell, h0, xs)
    act = cell.activation
    t_max = xs.shape[0]
    patterns = [np.asarray(p, dtype=np.int64) for p in patterns]
    if len(patterns) != t_max:
        raise ValueError(f"need {t_max} patterns, got {len(patterns)}")
    h = cell.hidden_size

    def chain(hi: int, lo: int) -> np.ndarray:
        # product of masked recurrent weights for steps hi down to lo
        m = np.eye(h)
        for j in range(hi, lo - 1, -1):
            masked, _ = mask_weights(cell.w_rec, patterns[j - 1], act)
            m = m @ masked
        return m

    z_final = chain(t_max - 1, 1) @ (cell.w_rec @ h0)
    for i in range(1, t_max + 1):
        z_final = z_final + chain(t_max - 1, i) @ (cell.u_in @ xs[i - 1] + cell.bias_h)
    for i in range(1, t_max):
        # intercepts injected at step i ride the remaining masked chain
        z_final = z_final + chain(t_max - 1, i + 1) @ (
            cell.w_rec @ act.intercepts[patterns[i - 1]]
        )
    v_masked, v_ic = mask_weights(cell.v_out, patterns[t_max - 1], act)
    return v_masked @ z_final + v_ic


def compile_rnn(cell: RnnCell, horizon: int) -> StageProgram:
    """Unroll a cell over a fixed horizon into a StageProgram whose input is
    the stacked vector [h0; x_1; ...; x_T]."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    h, d_in = cell.hidden_size, cell.d_in
    input_dim = h + horizon * d_in

    def input_selector(step: int) -> np.ndarray:
        # (h+1, input_dim+1) map contributing u_in @ x_step; zero homogeneous row
        sel = np.zeros((h + 1, input_dim + 1))
        col = h + (step - 1) * d_in
        sel[:-1, col:col + d_in] = cell.u_in
        return sel

    first = np.zeros((h + 1, input_dim + 1))
    first[:h, :h] = np.eye(h)
    first[-1, -1] = 1.0
    initial = augmented(cell.w_rec, cell.bias_h) @ first + input_selector(1)

    stages = [
        Stage(layer_index=t, width=h, activation=cell.activation, kind="rnn")
        for t in range(horizon)
    ]

    rec = augmented(cell.w_rec, cell.bias_h)
    out_map = augmented(cell.v_out)

    class _RnnProgram(StageProgram):
        def advance(self, stage_idx: int, e: np.ndarray, pattern: np.ndarray) -> np.ndarray:
            stage = self.stages[stage_idx]
            post = mask_rows(e, stage.activation, pattern)
            if stage_idx + 1 < len(self.stages):
                return rec @ post + input_selector(stage_idx + 2)
            return out_map @ post

    return _RnnProgram(input_dim, cell.d_out, stages, initial)


def stack_rnn_input(h0, xs) -> np.ndarray:
    """Pack (h0, inputs) into the unrolled program's flat input vector."""
    h0 = np.asarray(h0, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    return np.concatenate([h0, xs.ravel()])
