"""Toy datasets for the bundled experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class Dataset:
    inputs: np.ndarray   # (n, d)
    targets: np.ndarray  # (n, t)
    name: str = ""
    seed: int | None = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("inputs and targets must be 2-D")
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have equal length")

    def __len__(self):
        return len(self.inputs)


def gen_parabola(n: int = 5000, lo: float = -2.5, hi: float = 2.5) -> Dataset:
    """Regularly spaced (x, x^2) pairs, endpoints included."""
    if n < 2:
        raise ValueError("need at least two samples")
    x = np.linspace(lo, hi, n)
    return Dataset(inputs=x[:, None], targets=(x ** 2)[:, None], name="parabola")


def gen_halfmoons(n: int = 1000, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved crescents with binary labels, n/2 points each.

    The outer moon sits on the unit circle at the origin, the inner on the
    unit circle at (1, 0.5), both traced over half a turn; gaussian noise is
    added per coordinate.
    """
    if n % 2:
        raise ValueError("n must be even so the classes balance")
    rng = np.random.default_rng(seed)
    half = n // 2
    t = np.linspace(0.0, np.pi, half)
    outer = np.column_stack([np.cos(t), np.sin(t)])
    inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    points = np.vstack([outer, inner])
    if noise > 0:
        points = points + rng.normal(scale=noise, size=points.shape)
    labels = np.concatenate([np.zeros(half), np.ones(half)])[:, None]
    order = rng.permutation(n)
    return Dataset(inputs=points[order], targets=labels[order],
                   name="halfmoon", seed=seed)
