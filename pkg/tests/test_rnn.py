import numpy as np
import pytest

from nn2tree import activations as act_lib
from nn2tree.effective import lazy_eval
from nn2tree.layers import RnnCell
from nn2tree.rnn import compile_rnn, rnn_effective_output, rnn_forward, stack_rnn_input
from nn2tree.tree import build_tree, tree_eval


def rel_dev(a, b):
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))


def random_cell(rng, h=3, d_in=2, d_out=2, activation=None, scale=0.5):
    return RnnCell(
        w_rec=rng.normal(scale=scale, size=(h, h)),
        u_in=rng.normal(size=(h, d_in)),
        v_out=rng.normal(size=(d_out, h)),
        bias_h=rng.normal(scale=0.1, size=h),
        activation=activation or act_lib.relu(),
    )


def recurrence_oracle(cell, h0, xs):
    """Separately coded recurrence; the reference for every other route."""
    h = np.array(h0, dtype=float)
    outputs = []
    for x in xs:
        z = cell.w_rec @ h + cell.u_in @ x + cell.bias_h
        act = cell.activation
        r = np.searchsorted(act.breakpoints, z, side="right")
        h = act.slopes[r] * z + act.intercepts[r]
        outputs.append(cell.v_out @ h)
    return np.asarray(outputs)


def test_single_step_identity():
    rng = np.random.default_rng(0)
    cell = random_cell(rng, activation=act_lib.identity())
    cell.bias_h[:] = 0.0
    x = rng.normal(size=(1, 2))
    _, os, _ = rnn_forward(cell, np.zeros(3), x)
    assert np.allclose(os[0], cell.v_out @ (cell.u_in @ x[0]), rtol=1e-12)


def test_zero_inputs_positive_relu_path():
    rng = np.random.default_rng(1)
    w = np.abs(rng.normal(size=(3, 3))) * 0.3
    cell = RnnCell(w, np.zeros((3, 2)), rng.normal(size=(2, 3)),
                   np.zeros(3), act_lib.relu())
    h0 = np.abs(rng.normal(size=3)) + 0.1
    xs = np.zeros((4, 2))
    _, os, trace = rnn_forward(cell, h0, xs)
    # positivity holds throughout, so the output telescopes to V W^t h0
    assert all(np.all(p == 1) for p in trace.patterns)
    h = h0
    for t in range(4):
        h = w @ h
        assert np.allclose(os[t], cell.v_out @ h, rtol=1e-12)


def test_forward_matches_independent_recurrence():
    rng = np.random.default_rng(2)
    cell = random_cell(rng)
    h0 = rng.normal(size=3)
    xs = rng.normal(size=(5, 2))
    _, os, _ = rnn_forward(cell, h0, xs)
    assert np.allclose(os, recurrence_oracle(cell, h0, xs), rtol=1e-12, atol=1e-12)


def test_effective_output_single_step():
    rng = np.random.default_rng(3)
    cell = random_cell(rng)
    h0 = rng.normal(size=3)
    xs = rng.normal(size=(1, 2))
    _, os, trace = rnn_forward(cell, h0, xs)
    out = rnn_effective_output(cell, h0, xs, trace.patterns)
    # hand recomputation: V masked by the step pattern applied to z_1
    z1 = cell.w_rec @ h0 + cell.u_in @ xs[0] + cell.bias_h
    slopes = cell.activation.slopes[trace.patterns[0]]
    assert np.allclose(out, (cell.v_out * slopes) @ z1, rtol=1e-12)
    assert np.allclose(out, os[-1], rtol=1e-12)


def test_effective_output_identity_telescopes():
    rng = np.random.default_rng(4)
    cell = random_cell(rng, activation=act_lib.identity())
    cell.bias_h[:] = 0.0
    h0 = rng.normal(size=3)
    xs = rng.normal(size=(3, 2))
    patterns = [np.zeros(3, dtype=int)] * 3
    out = rnn_effective_output(cell, h0, xs, patterns)
    w = cell.w_rec
    expected = cell.v_out @ (
        w @ w @ (w @ h0)
        + w @ w @ (cell.u_in @ xs[0])
        + w @ (cell.u_in @ xs[1])
        + cell.u_in @ xs[2]
    )
    assert np.allclose(out, expected, rtol=1e-10)


@pytest.mark.parametrize("activation", [act_lib.relu(), act_lib.leaky_relu(0.3),
                                        act_lib.hard_tanh()])
def test_effective_output_matches_forward(activation):
    rng = np.random.default_rng(5)
    cell = random_cell(rng, activation=activation)
    h0 = rng.normal(size=3)
    worst = 0.0
    for _ in range(100):
        xs = rng.normal(size=(6, 2))
        _, os, trace = rnn_forward(cell, h0, xs)
        out = rnn_effective_output(cell, h0, xs, trace.patterns)
        worst = max(worst, rel_dev(out, os[-1]))
    assert worst <= 1e-8, worst


def test_pattern_count_mismatch():
    rng = np.random.default_rng(6)
    cell = random_cell(rng)
    with pytest.raises(ValueError, match="patterns"):
        rnn_effective_output(cell, np.zeros(3), rng.normal(size=(4, 2)),
                             [np.zeros(3, dtype=int)] * 3)


def test_unrolled_program_and_tree_agree():
    rng = np.random.default_rng(7)
    cell = random_cell(rng)
    program = compile_rnn(cell, 4)
    tree = build_tree(program, lazy=True)
    for _ in range(25):
        h0 = rng.normal(size=3)
        xs = rng.normal(size=(4, 2))
        _, os, trace = rnn_forward(cell, h0, xs)
        stacked = stack_rnn_input(h0, xs)
        lazy = lazy_eval(program, stacked)
        assert rel_dev(lazy.output, os[-1]) <= 1e-8
        assert lazy.categorization == trace.categorization()
        out, _, _ = tree_eval(tree, stacked)
        assert np.array_equal(out, lazy.output)
