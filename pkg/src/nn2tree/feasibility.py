"""Linear feasibility by a dense phase-1 simplex with Bland's rule.

Decides whether {x : A x <= b, lo <= x <= hi} is empty. Box bounds enter as
ordinary rows after shifting variables to be non-negative, rows with negative
right-hand sides receive artificial variables, and the phase-1 objective is
the total artificial mass. Bland's pivoting rule keeps the iteration finite;
problem sizes here are tiny (a handful of variables, tens of rows), so the
plain dense tableau is the simplest thing that is auditable.
"""

from __future__ import annotations

import numpy as np

PIVOT_TOL = 1e-11
MAX_ITERATIONS = 20000


def phase1_feasibility(a: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray
                       ) -> tuple[float, np.ndarray, bool]:
    """Minimize total constraint violation of A x <= b over the box [lo, hi].

    Returns (violation, x, stalled). violation == 0 (up to simplex tolerance)
    means x is a feasible point; a positive value is the least total slack
    shortfall, a certificate that the system is empty. stalled=True marks the
    numerically degenerate case where pivoting stopped early, in which case
    the reported violation is only an upper bound and callers must not treat
    it as an emptiness proof.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    n = lo.size
    if a.size == 0:
        a = np.zeros((0, n))
        b = np.zeros(0)
    if np.any(hi < lo):
        return float("inf"), lo, False
    # shift x = lo + y, y >= 0, and append the upper-bound rows y <= hi - lo
    rows_a = np.vstack([a, np.eye(n)])
    rows_b = np.concatenate([b - a @ lo, hi - lo])
    m = rows_a.shape[0]

    neg = rows_b < 0.0
    rows_a[neg] *= -1.0
    rows_b[neg] *= -1.0
    # columns: y (n) | slacks (m) | artificials (one per negated row)
    art_rows = np.where(neg)[0]
    n_art = art_rows.size
    n_cols = n + m + n_art
    tableau = np.zeros((m + 1, n_cols + 1))
    tableau[:m, :n] = rows_a
    slack_sign = np.where(neg, -1.0, 1.0)
    tableau[np.arange(m), n + np.arange(m)] = slack_sign
    for j, row in enumerate(art_rows):
        tableau[row, n + m + j] = 1.0
    tableau[:m, -1] = rows_b

    basis = np.empty(m, dtype=np.int64)
    basis[~neg] = n + np.where(~neg)[0]
    basis[neg] = n + m + np.arange(n_art)
    # objective row: minimize sum of artificials, expressed over nonbasics
    tableau[m] = -tableau[art_rows].sum(axis=0) if n_art else 0.0
    tableau[m, n + m:n_cols] = 0.0

    stalled = False
    for it in range(MAX_ITERATIONS + 1):
        if it == MAX_ITERATIONS:
            stalled = True
            break
        reduced = tableau[m, :n_cols]
        candidates = np.where(reduced < -PIVOT_TOL)[0]
        if candidates.size == 0:
            break
        enter = int(candidates[0])  # Bland: lowest index
        col = tableau[:m, enter]
        ratios = np.full(m, np.inf)
        positive = col > PIVOT_TOL
        ratios[positive] = tableau[:m, -1][positive] / col[positive]
        best = np.min(ratios)
        if not np.isfinite(best):
            # the objective is bounded below, so this is numerical noise
            stalled = True
            break
        tied = np.where(ratios <= best + PIVOT_TOL * (1 + abs(best)))[0]
        leave = int(tied[np.argmin(basis[tied])])  # Bland: lowest basic index
        pivot = tableau[leave, enter]
        tableau[leave] /= pivot
        for r in range(m + 1):
            if r != leave and tableau[r, enter] != 0.0:
                tableau[r] -= tableau[r, enter] * tableau[leave]
        basis[leave] = enter

    objective = -float(tableau[m, -1])
    y = np.zeros(n_cols)
    y[basis] = tableau[:m, -1]
    x = lo + y[:n]
    # clamp roundoff drift back into the box
    return max(objective, 0.0), np.clip(x, lo, hi), stalled
