"""Piecewise-linear scalar activations: breakpoints, per-region slopes and intercepts.

A k-region activation is described by k-1 strictly increasing breakpoints
t_0 < ... < t_{k-2} and per-region (slope, intercept) pairs. Region j covers
[t_{j-1}, t_j) with t_{-1} = -inf and t_{k-1} = +inf: a value sitting exactly
on a breakpoint belongs to the region above it. Every evaluator in this
package routes region decisions through `region_of`, so tie-breaking is
identical everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

CONTINUITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PwlActivation:
    breakpoints: np.ndarray  # ascending, length k-1
    slopes: np.ndarray       # length k
    intercepts: np.ndarray   # length k
    name: str = "pwl"

    def __init__(self, breakpoints, slopes, intercepts=None, name="pwl"):
        bp = np.atleast_1d(np.asarray(breakpoints, dtype=np.float64))
        sl = np.atleast_1d(np.asarray(slopes, dtype=np.float64))
        if intercepts is None:
            ic = np.zeros_like(sl)
        else:
            ic = np.atleast_1d(np.asarray(intercepts, dtype=np.float64))
        if sl.size < 1:
            raise ValueError("activation needs at least one region")
        if bp.size != sl.size - 1:
            raise ValueError(
                f"{sl.size} regions need {sl.size - 1} breakpoints, got {bp.size}"
            )
        if ic.size != sl.size:
            raise ValueError("slopes and intercepts must have equal length")
        if bp.size > 1 and not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        # continuity at every interior breakpoint
        for j, t in enumerate(bp):
            left = sl[j] * t + ic[j]
            right = sl[j + 1] * t + ic[j + 1]
            if abs(left - right) > CONTINUITY_TOL * (1.0 + abs(left)):
                raise ValueError(
                    f"discontinuity at breakpoint {t}: {left} vs {right}"
                )
        bp.flags.writeable = False
        sl.flags.writeable = False
        ic.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "intercepts", ic)
        object.__setattr__(self, "name", name)

    @property
    def num_regions(self) -> int:
        return self.slopes.size

    def region_of(self, z):
        """Region index for scalar or array z (breakpoints assigned upward)."""
        return region_of(z, self.breakpoints)

    def __call__(self, z):
        """Evaluate the activation elementwise via its region table."""
        z = np.asarray(z, dtype=np.float64)
        r = region_of(z, self.breakpoints)
        return self.slopes[r] * z + self.intercepts[r]

    def __repr__(self):
        return f"PwlActivation({self.name}, k={self.num_regions})"


def region_of(z, breakpoints: np.ndarray):
    """Shared region-selection routine: count of breakpoints <= z.

    This is the single tie-breaking convention (left-closed upward) used by
    the reference forward pass, lazy evaluation and tree evaluation alike.
    """
    return np.searchsorted(breakpoints, z, side="right")


def region_select(act: PwlActivation, z: float) -> tuple[int, float, float]:
    """Return (region, slope, intercept) for a scalar pre-activation value."""
    r = int(region_of(float(z), act.breakpoints))
    return r, float(act.slopes[r]), float(act.intercepts[r])


def breakpoint_comparisons(num_regions: int, region: int) -> int:
    """Comparisons a left-to-right breakpoint scan performs to land in `region`."""
    if num_regions <= 1:
        return 0
    return min(region + 1, num_regions - 1)


def identity() -> PwlActivation:
    return PwlActivation(breakpoints=[], slopes=[1.0], name="identity")


def relu() -> PwlActivation:
    return PwlActivation(breakpoints=[0.0], slopes=[0.0, 1.0], name="relu")


def leaky_relu(negative_slope: float = 0.3) -> PwlActivation:
    return PwlActivation(
        breakpoints=[0.0], slopes=[negative_slope, 1.0], name="leaky_relu"
    )


def hard_tanh() -> PwlActivation:
    return PwlActivation(
        breakpoints=[-1.0, 1.0],
        slopes=[0.0, 1.0, 0.0],
        intercepts=[-1.0, 0.0, 1.0],
        name="hard_tanh",
    )


def quantize_activation(
    f: Callable[[np.ndarray], np.ndarray],
    num_regions: int,
    domain: tuple[float, float],
    name: str | None = None,
) -> tuple[PwlActivation, float]:
    """Quantize a continuous scalar function into a piecewise-linear activation.

    The function is sampled at num_regions+1 equally spaced knots over the
    domain and linearly interpolated between them; the two edge segments
    extend to infinity with their slopes unchanged, so the result has exactly
    num_regions regions. Returns the activation and the sup-norm error of the
    interpolant against f, estimated on a dense grid over the domain.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise ValueError(f"empty domain [{lo}, {hi}]")
    if num_regions < 2:
        raise ValueError("num_regions must be >= 2")
    knots = np.linspace(lo, hi, num_regions + 1)
    vals = _eval_scalar_fn(f, knots)
    slopes = np.diff(vals) / np.diff(knots)
    intercepts = vals[:-1] - slopes * knots[:-1]
    act = PwlActivation(
        breakpoints=knots[1:-1],
        slopes=slopes,
        intercepts=intercepts,
        name=name or f"quantized[{num_regions}]",
    )
    grid = np.linspace(lo, hi, 1000 * num_regions + 1)
    max_error = float(np.max(np.abs(_eval_scalar_fn(f, grid) - act(grid))))
    return act, max_error


def _eval_scalar_fn(f, xs: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(xs), dtype=np.float64)
        if out.shape == xs.shape:
            return out
    except Exception:
        pass
    return np.asarray([float(f(x)) for x in xs], dtype=np.float64)
