"""First-order solvers: projected gradient with Armijo backtracking, and
scalar/batched golden-section minimization for the K=2 fast paths.
"""
from __future__ import annotations

import numpy as np

__all__ = ["projected_gradient", "golden_section", "golden_section_batch"]

_GOLD = (np.sqrt(5.0) - 1.0) / 2.0


def projected_gradient(fun, grad, project, x0: np.ndarray,
                       max_iters: int = 5000, improve_tol: float = 1e-10,
                       tie_tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Minimize a convex function over a convex set given by its projection.

    Stops when an accepted step improves the objective by less than
    `improve_tol`, or after `max_iters` iterations. The reported minimizer is
    the first iterate whose value is within `tie_tol` of the best value seen
    (deterministic tie-breaking).
    """
    x = project(np.asarray(x0, dtype=np.float64))
    f = fun(x)
    trail = [(f, x.copy())]
    step = 1.0
    for _ in range(max_iters):
        g = grad(x)
        improved = False
        s = step
        for _ in range(60):
            cand = project(x - s * g)
            fc = fun(cand)
            # sufficient decrease relative to the actual move
            if fc <= f - 1e-4 * float(g @ (x - cand)) and fc < f:
                x, f = cand, fc
                trail.append((f, x.copy()))
                step = min(s * 1.3, 1e6)
                improved = True
                break
            s *= 0.5
        if not improved:
            break
        if len(trail) >= 2 and trail[-2][0] - trail[-1][0] < improve_tol:
            break
    best = min(t[0] for t in trail)
    for val, xi in trail:  # first iterate achieving the optimum within tol
        if val <= best + tie_tol:
            return xi, val
    return x, f  # unreachable


def golden_section(fun, lo: float, hi: float, iters: int = 90) -> tuple[float, float]:
    """Minimize a unimodal scalar function on [lo, hi]."""
    a, b = float(lo), float(hi)
    x1 = b - _GOLD * (b - a)
    x2 = a + _GOLD * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLD * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLD * (b - a)
            f2 = fun(x2)
    xm = 0.5 * (a + b)
    return xm, fun(xm)


def golden_section_batch(fun, lo: np.ndarray, hi: np.ndarray,
                         iters: int = 90) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized golden section: minimize fun elementwise on [lo[i], hi[i]].

    `fun` must map an array of scalars to an array of objective values of the
    same shape. Degenerate intervals (lo == hi) are handled naturally.
    """
    a = np.asarray(lo, dtype=np.float64).copy()
    b = np.asarray(hi, dtype=np.float64).copy()
    x1 = b - _GOLD * (b - a)
    x2 = a + _GOLD * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        left = f1 <= f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        x1n = b - _GOLD * (b - a)
        x2n = a + _GOLD * (b - a)
        # only one of the two probes is new on each side; evaluate both anyway
        # (vector evaluation is cheap compared to branching bookkeeping)
        f1, f2 = fun(x1n), fun(x2n)
        x1, x2 = x1n, x2n
    xm = 0.5 * (a + b)
    return xm, fun(xm)
