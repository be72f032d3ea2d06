"""Euclidean projections onto the polytopes the solvers walk on.

Everything here is deterministic: the sort-based routines inherit numpy's
stable ordering, and the bisection/cyclic schemes use fixed iteration budgets.
Projections onto convex sets are unique, so tie-breaking only matters for the
iterate bookkeeping done by the callers.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "project_simplex",
    "project_capped_simplex",
    "project_l1_ball",
    "project_l1_ball_simplex",
    "dykstra",
]


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Project v onto {x >= 0, sum x = 1} (sort-and-threshold)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def project_capped_simplex(v: np.ndarray, cap: np.ndarray) -> np.ndarray:
    """Project v onto {0 <= x <= cap, sum x = 1}.

    The solution is x = clip(v - theta, 0, cap) where theta is chosen so the
    mass is 1; the mass is continuous and non-increasing in theta, so theta is
    found by bisection. Requires sum(cap) >= 1.
    """
    v = np.asarray(v, dtype=np.float64)
    cap = np.asarray(cap, dtype=np.float64)
    if cap.sum() < 1.0 - 1e-12:
        raise ValueError("capped simplex is empty: caps sum below 1")
    lo = float(np.min(v - cap))
    hi = float(np.max(v))
    # mass(lo) >= 1 (all coordinates at their caps), mass(hi) <= small
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        mass = np.clip(v - mid, 0.0, cap).sum()
        if mass > 1.0:
            lo = mid
        else:
            hi = mid
    x = np.clip(v - 0.5 * (lo + hi), 0.0, cap)
    s = x.sum()
    if s > 0:
        # polish the (tiny) bisection residual on the free coordinates
        free = (x > 0) & (x < cap)
        if np.any(free):
            x[free] += (1.0 - s) / free.sum()
            x = np.clip(x, 0.0, cap)
    return x


def _project_l1_ball_origin(w: np.ndarray, radius: float) -> np.ndarray:
    """Project w onto {x : ||x||_1 <= radius} centered at the origin."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    a = np.abs(w)
    if a.sum() <= radius:
        return w.copy()
    if radius == 0.0:
        return np.zeros_like(w)
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, w.size + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[rho - 1] / rho
    return np.sign(w) * np.maximum(a - theta, 0.0)


def project_l1_ball(v: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    return center + _project_l1_ball_origin(np.asarray(v, float) - center, radius)


def dykstra(v: np.ndarray, projections, iters: int = 200, tol: float = 1e-12) -> np.ndarray:
    """Dykstra's scheme for projecting onto an intersection of convex sets.

    `projections` is a list of single-set projection callables. Plain
    alternating projection converges to a point of the intersection but not
    necessarily the projection of v; Dykstra's correction terms fix that.
    """
    x = np.asarray(v, dtype=np.float64).copy()
    corr = [np.zeros_like(x) for _ in projections]
    for _ in range(iters):
        x_prev = x.copy()
        drift = 0.0
        for j, proj in enumerate(projections):
            y = proj(x + corr[j])
            new_corr = x + corr[j] - y
            drift = max(drift, float(np.abs(new_corr - corr[j]).max()))
            corr[j] = new_corr
            x = y
        # the iterate can plateau for a few sweeps while the corrections are
        # still moving; stop only once both have settled
        if np.abs(x - x_prev).max() < tol and drift < tol:
            break
    return x


def project_l1_ball_simplex(v: np.ndarray, center: np.ndarray, radius: float,
                            iters: int = 200) -> np.ndarray:
    """Project onto simplex ∩ {||x - center||_1 <= radius} (center a pmf).

    The intersection is nonempty (it contains `center`).  The sweep ends on
    the simplex projection so the returned iterate is always a pmf; any
    residual sits in the ball constraint, shrinking with the iteration count.
    """
    return dykstra(
        v,
        [lambda x: project_l1_ball(x, center, radius), project_simplex],
        iters=iters,
    )
