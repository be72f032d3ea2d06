"""A dense two-phase primal simplex solver with Bland's rule.

Small transportation-style LPs (K <= 32 alphabets, so at most a few thousand
variables) do not justify an external solver; a dense tableau with Bland's
anti-cycling pivot rule is exact enough, deterministic, and dependency-free.

Problems are given in standard form:

    minimize    c @ x
    subject to  A @ x = b,  x >= 0

with arbitrary-sign b (rows are flipped internally). Redundant rows are
tolerated: artificial variables that remain basic at zero after phase 1 are
pivoted out when possible and their rows dropped otherwise.
"""
from __future__ import annotations

import numpy as np

__all__ = ["simplex_solve", "LpInfeasible"]

_EPS = 1e-10


class LpInfeasible(Exception):
    pass


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: np.ndarray, ncols: int, max_iters: int):
    """Iterate on tableau T (last row = reduced costs, last col = rhs)."""
    m = T.shape[0] - 1
    for _ in range(max_iters):
        negs = np.flatnonzero(T[m, :ncols] < -_EPS)
        if negs.size == 0:
            return
        enter = int(negs[0])  # Bland: lowest eligible index enters
        col = T[:m, enter]
        pos = col > _EPS
        if not np.any(pos):
            raise LpInfeasible("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        best = ratios.min()
        cand = np.flatnonzero(ratios <= best + _EPS)
        leave = int(cand[np.argmin(basis[cand])])  # lowest basis index leaves
        _pivot(T, basis, leave, enter)
    raise LpInfeasible("simplex iteration limit hit")


def simplex_solve(c: np.ndarray, A: np.ndarray, b: np.ndarray,
                  max_iters: int = 50000) -> tuple[np.ndarray, float]:
    """Solve min c@x s.t. A@x = b, x >= 0. Returns (x, value).

    Raises LpInfeasible when the feasible set is empty or the LP is unbounded.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64).copy()
    b = np.asarray(b, dtype=np.float64).copy()
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # ---- phase 1: minimize the sum of artificial variables
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    basis = np.arange(n, n + m)
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    _run_simplex(T, basis, n + m, max_iters)
    if T[m, -1] < -1e-7:
        raise LpInfeasible(f"infeasible (phase-1 value {-T[m, -1]:.3e})")

    # drive any zero-level artificials out of the basis
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            pivots = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
            if pivots.size:
                _pivot(T, basis, r, int(pivots[0]))
            else:
                keep[r] = False  # redundant constraint
    rows = np.flatnonzero(keep)
    basis = basis[rows]

    # ---- phase 2 on the original objective
    T2 = np.zeros((rows.size + 1, n + 1))
    T2[:rows.size, :n] = T[rows, :n]
    T2[:rows.size, -1] = T[rows, -1]
    T2[rows.size, :n] = c
    for r, bv in enumerate(basis):
        T2[rows.size] -= c[bv] * T2[r]
    _run_simplex(T2, basis, n, max_iters)

    x = np.zeros(n)
    x[basis] = np.maximum(T2[:rows.size, -1], 0.0)
    return x, float(c @ x)
