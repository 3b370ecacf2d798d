import numpy as np
import pytest
from hypothesis import given, strategies as st

from nn2tree import activations as act_lib
from nn2tree.activations import (
    PwlActivation,
    breakpoint_comparisons,
    quantize_activation,
    region_select,
)


def test_relu_region_select():
    act = act_lib.relu()
    assert region_select(act, -2.0) == (0, 0.0, 0.0)
    region, slope, intercept = region_select(act, 3.0)
    assert (region, slope) == (1, 1.0)


def test_leaky_relu_negative_region():
    act = act_lib.leaky_relu(0.3)
    region, slope, _ = region_select(act, -1.0)
    assert region == 0
    assert slope == 0.3


def test_breakpoint_assigned_upward():
    # the boundary convention: a value on a breakpoint takes the region above
    act = act_lib.relu()
    region, slope, _ = region_select(act, 0.0)
    assert (region, slope) == (1, 1.0)
    ht = act_lib.hard_tanh()
    assert region_select(ht, -1.0)[0] == 1
    assert region_select(ht, 1.0)[0] == 2


def test_breakpoints_must_increase():
    with pytest.raises(ValueError):
        PwlActivation(breakpoints=[1.0, 0.5], slopes=[0.0, 1.0, 0.0])


def test_discontinuity_rejected():
    with pytest.raises(ValueError, match="discontinuity"):
        PwlActivation(breakpoints=[0.0], slopes=[1.0, 1.0], intercepts=[0.0, 0.5])


def test_hard_tanh_values():
    act = act_lib.hard_tanh()
    zs = np.array([-2.5, -1.0, 0.0, 0.7, 1.0, 4.0])
    assert np.allclose(act(zs), np.clip(zs, -1.0, 1.0))


@given(st.floats(min_value=-50, max_value=50, allow_nan=False))
def test_region_select_total_and_consistent(z):
    # exactly one region, and the (slope, intercept) pair reproduces the value
    for act in (act_lib.relu(), act_lib.leaky_relu(0.3), act_lib.hard_tanh()):
        region, slope, intercept = region_select(act, z)
        assert 0 <= region < act.num_regions
        assert act(z) == pytest.approx(slope * z + intercept, abs=1e-12)
        if region > 0:
            assert z >= act.breakpoints[region - 1]
        if region < act.num_regions - 1:
            assert z < act.breakpoints[region]


def test_quantize_identity_is_linear():
    for num_regions in (2, 5, 16):
        act, max_error = quantize_activation(lambda x: x, num_regions, (-2.0, 2.0))
        assert max_error == 0.0
        zs = np.linspace(-5, 5, 101)
        assert np.allclose(act(zs), zs, atol=1e-12)
        assert np.allclose(act.slopes, 1.0)


def test_quantize_error_monotone_tanh_and_sigmoid():
    def sigmoid(x):
        return 1.0 / (1.0 + np.exp(-x))

    for fn in (np.tanh, sigmoid):
        errors = [quantize_activation(fn, n, (-3.0, 3.0))[1] for n in (2, 8, 32, 128)]
        assert all(a >= b for a, b in zip(errors, errors[1:])), errors


def test_quantize_tanh_64_regions_accurate():
    _, max_error = quantize_activation(np.tanh, 64, (-4.0, 4.0))
    assert max_error < 0.01


def test_quantize_region_count_and_flat_extension():
    act, _ = quantize_activation(np.tanh, 4, (-3.0, 3.0))
    assert act.num_regions == 4
    # outside the domain the edge segments continue with unchanged slope
    assert act(np.array([-10.0])) == pytest.approx(
        act.slopes[0] * -10.0 + act.intercepts[0])
    assert act(np.array([10.0])) == pytest.approx(
        act.slopes[-1] * 10.0 + act.intercepts[-1])


def test_quantize_rejects_bad_domain():
    with pytest.raises(ValueError):
        quantize_activation(np.tanh, 4, (1.0, 1.0))
    with pytest.raises(ValueError):
        quantize_activation(np.tanh, 1, (-1.0, 1.0))


def test_comparison_count_convention():
    # left-to-right scan: landing in region r costs min(r+1, k-1) comparisons
    assert breakpoint_comparisons(1, 0) == 0
    assert breakpoint_comparisons(2, 0) == 1
    assert breakpoint_comparisons(2, 1) == 1
    assert breakpoint_comparisons(3, 0) == 1
    assert breakpoint_comparisons(3, 1) == 2
    assert breakpoint_comparisons(3, 2) == 2
