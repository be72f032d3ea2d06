"""Worst-case acceptance statistic and decision rule.

The defender accepts the null hypothesis ("test and training come from the
same source") when a generalized divergence between the test type and the
*best cleaned* training type falls below a threshold.  Cleaning means undoing
the worst admissible training corruption:

* addition model -- the attacker appended a fraction ``alpha`` of fake
  samples, so the defender minimizes over removable pmfs ``Q`` with
  ``P_t - alpha * Q >= 0`` and renormalizes by ``1 - alpha``;
* replacement model -- the attacker overwrote a fraction ``alpha``, so the
  defender minimizes over pairs ``(Q_R, Q_A)`` of inserted/removed pmfs,
  equivalently over cleaned pmfs ``P'`` with ``l1(P', P_t) <= 2 * alpha``.

Both inner problems are convex; they are solved by projected gradient on the
respective polytope, with an exact clipped-interval fast path for binary
alphabets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import GameConfig, Variant
from .optimize import projected_gradient
from .pmf import EmpiricalType, Pmf, _h_c_arrays, delta_n
from .projections import (
    dykstra,
    project_capped_simplex,
    project_l1_ball_simplex,
    project_simplex,
)

__all__ = [
    "DecisionOutcome",
    "statistic_addition",
    "statistic_replacement",
    "statistic_replacement_pairs",
    "statistic",
    "decide",
    "statistic_batch_k2",
]

_LOG2E = 1.0 / np.log(2.0)


@dataclass(frozen=True)
class DecisionOutcome:
    """Result of one accept/reject decision.

    ``minimizer`` holds the optimal removable pmf ``(Q,)`` in the addition
    model, or the pair ``(Q_R, Q_A)`` in the replacement model.  When the
    finite-n threshold ``lambda - delta_n`` is nonpositive the acceptance
    region is empty; this is flagged via ``degenerate`` and the rule always
    rejects.
    """

    statistic: float
    threshold: float
    accept_h0: bool
    degenerate: bool
    minimizer: tuple[Pmf, ...]


def _check_alpha_c(alpha: float, c: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if c <= 0.0:
        raise ValueError(f"c must be positive, got {c}")


def _h_and_grad(pv: np.ndarray, w: np.ndarray, cp: float) -> tuple[float, np.ndarray]:
    """Objective h_c(pv, w, cp) and its gradient in the second argument.

    d h / d w_j = cp * log2(w_j / u_j); at the boundary w_j = 0 < u_j the
    analytic term is -inf, replaced by the one-sided value at a tiny positive
    w_j (the direction is the same and the line search controls the step).
    """
    val, u = _h_c_arrays(pv, w, cp)
    safe_w = np.maximum(w, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(u > 0.0, safe_w / np.maximum(u, 1e-300), 1.0)
    g = cp * np.log2(ratio)
    g[u <= 0.0] = 0.0
    return val, g


def _h2_vec(a: np.ndarray, b: np.ndarray, cp: float) -> np.ndarray:
    """Vectorized binary h_c between pmfs (a, 1-a) and (b, 1-b)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    u0 = (a + cp * b) / (1.0 + cp)
    u1 = ((1.0 - a) + cp * (1.0 - b)) / (1.0 + cp)

    def _t(x, u):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = x * (np.log2(np.maximum(x, 1e-300)) - np.log2(np.maximum(u, 1e-300)))
        return np.where(x > 0.0, out, 0.0)

    total = _t(a, u0) + _t(1.0 - a, u1) + cp * (_t(b, u0) + _t(1.0 - b, u1))
    return np.maximum(total, 0.0)


def _minimize_h(pv: np.ndarray, project, starts, cp: float) -> tuple[float, np.ndarray]:
    """Minimize w -> h_c(pv, w, cp) over a convex set given by `project`."""
    fun = lambda w: _h_and_grad(pv, w, cp)[0]
    grad = lambda w: _h_and_grad(pv, w, cp)[1]
    best_val = np.inf
    best_w = None
    for s in starts:
        w, val = projected_gradient(fun, grad, project, project(np.asarray(s, float)))
        if val < best_val - 1e-12:
            best_val, best_w = val, w
    return max(best_val, 0.0), best_w


def statistic_addition(P_v: Pmf, P_t: Pmf, alpha: float, c: float) -> tuple[float, Pmf]:
    """Minimum of h_c(P_v, (P_t - alpha*Q)/(1-alpha), (1-alpha)*c) over Q.

    Returns the optimal value and an achieving Q.  Feasibility requires
    P_t - alpha*Q >= 0 componentwise; Q = P_t always works, so the program
    is never empty.
    """
    _check_alpha_c(alpha, c)
    if P_v.k != P_t.k:
        raise ValueError("alphabet size mismatch between test and training pmfs")
    pv = P_v.probs
    pt = P_t.probs
    k = pv.size
    if alpha == 0.0:
        val, _ = _h_c_arrays(pv, pt, c)
        return max(val, 0.0), Pmf(np.full(k, 1.0 / k))
    cp = (1.0 - alpha) * c
    cap = pt / (1.0 - alpha)
    if k == 2:
        lo = max(0.0, (pt[0] - alpha) / (1.0 - alpha))
        hi = min(1.0, pt[0] / (1.0 - alpha))
        # h2(pv, .) is convex with a zero at pv: the interval minimum is at
        # the clipped point
        w0 = min(max(pv[0], lo), hi)
        val = float(_h2_vec(pv[0], w0, cp))
        w = np.array([w0, 1.0 - w0])
    else:
        project = lambda v: project_capped_simplex(v, cap)
        starts = [pv, pt, 0.5 * (pv + pt)]
        val, w = _minimize_h(pv, project, starts, cp)
    q = np.maximum(pt - (1.0 - alpha) * w, 0.0) / alpha
    total = q.sum()
    q = q / total if total > 0.0 else np.full(k, 1.0 / k)
    return max(val, 0.0), Pmf(q)


def _replacement_pair_from_cleaned(pt: np.ndarray, w: np.ndarray,
                                   alpha: float) -> tuple[Pmf, Pmf]:
    """Recover (Q_R, Q_A) with P' = P_t + alpha*(Q_R - Q_A) from a cleaned P'."""
    k = pt.size
    if alpha == 0.0:
        u = np.full(k, 1.0 / k)
        return Pmf(u), Pmf(u)
    v = (w - pt) / alpha
    pos = np.maximum(v, 0.0)
    neg = np.maximum(-v, 0.0)
    fill_r = max(1.0 - pos.sum(), 0.0) / k
    fill_a = max(1.0 - neg.sum(), 0.0) / k
    return Pmf(pos + fill_r), Pmf(neg + fill_a)


def statistic_replacement(P_v: Pmf, P_t: Pmf, alpha: float, c: float
                          ) -> tuple[float, Pmf, Pmf]:
    """Minimum of h_c(P_v, P_t + alpha*(Q_R - Q_A), c) over pmf pairs.

    Solved in the cleaned-pmf parameterization: minimize over P' in the
    intersection of the simplex with the l1 ball of radius 2*alpha around
    P_t, then map the optimum back to an achieving (Q_R, Q_A) pair.  The
    direct pair-space solver lives in :func:`statistic_replacement_pairs`
    and the two must agree.
    """
    _check_alpha_c(alpha, c)
    if P_v.k != P_t.k:
        raise ValueError("alphabet size mismatch between test and training pmfs")
    pv = P_v.probs
    pt = P_t.probs
    k = pv.size
    if alpha == 0.0:
        val, _ = _h_c_arrays(pv, pt, c)
        qr, qa = _replacement_pair_from_cleaned(pt, pt, alpha)
        return max(val, 0.0), qr, qa
    if k == 2:
        lo = max(0.0, pt[0] - alpha)
        hi = min(1.0, pt[0] + alpha)
        w0 = min(max(pv[0], lo), hi)
        val = float(_h2_vec(pv[0], w0, c))
        w = np.array([w0, 1.0 - w0])
    else:
        project = lambda v: project_l1_ball_simplex(v, pt, 2.0 * alpha)
        starts = [pv, pt, 0.5 * (pv + pt)]
        val, w = _minimize_h(pv, project, starts, c)
    qr, qa = _replacement_pair_from_cleaned(pt, w, alpha)
    return max(val, 0.0), qr, qa


def statistic_replacement_pairs(P_v: Pmf, P_t: Pmf, alpha: float, c: float
                                ) -> tuple[float, Pmf, Pmf]:
    """Replacement statistic solved directly over the (Q_R, Q_A) pair.

    Independent route used to cross-check :func:`statistic_replacement`:
    projected gradient on the product of two simplices intersected with the
    per-symbol feasibility halfspaces Q_R[i] - Q_A[i] >= -P_t[i]/alpha.
    """
    _check_alpha_c(alpha, c)
    if P_v.k != P_t.k:
        raise ValueError("alphabet size mismatch between test and training pmfs")
    pv = P_v.probs
    pt = P_t.probs
    k = pv.size
    if alpha == 0.0:
        val, _ = _h_c_arrays(pv, pt, c)
        qr, qa = _replacement_pair_from_cleaned(pt, pt, alpha)
        return max(val, 0.0), qr, qa

    floor = -pt / alpha

    def proj_r(x):
        out = x.copy()
        out[:k] = project_simplex(x[:k])
        return out

    def proj_a(x):
        out = x.copy()
        out[k:] = project_simplex(x[k:])
        return out

    def proj_gap(x):
        # Project each (Q_R[i], Q_A[i]) pair onto {a - b >= floor[i]}.
        a = x[:k].copy()
        b = x[k:].copy()
        short = floor - (a - b)
        bump = np.maximum(short, 0.0) / 2.0
        return np.concatenate([a + bump, b - bump])

    project = lambda v: dykstra(v, [proj_r, proj_a, proj_gap])

    def cleaned(x):
        return pt + alpha * (x[:k] - x[k:])

    def fun(x):
        return _h_and_grad(pv, np.maximum(cleaned(x), 0.0), c)[0]

    def grad(x):
        g = _h_and_grad(pv, np.maximum(cleaned(x), 0.0), c)[1]
        return alpha * np.concatenate([g, -g])

    u = np.full(k, 1.0 / k)
    starts = [
        np.concatenate([u, u]),
        np.concatenate([pt, pt]),
        np.concatenate([pv, pv]),
    ]
    best_val = np.inf
    best_x = None
    for s in starts:
        x, val = projected_gradient(fun, grad, project, project(s))
        if val < best_val - 1e-12:
            best_val, best_x = val, x
    return max(best_val, 0.0), Pmf(project_simplex(best_x[:k])), Pmf(
        project_simplex(best_x[k:]))


def statistic(P_v: Pmf, P_t: Pmf, alpha: float, c: float,
              variant: Variant | str) -> tuple[float, tuple[Pmf, ...]]:
    """Variant dispatch returning (value, minimizer tuple)."""
    if Variant(variant) is Variant.ADDITION:
        val, q = statistic_addition(P_v, P_t, alpha, c)
        return val, (q,)
    val, qr, qa = statistic_replacement(P_v, P_t, alpha, c)
    return val, (qr, qa)


def decide(v: EmpiricalType, t: EmpiricalType, cfg: GameConfig) -> DecisionOutcome:
    """Accept/reject for an observed test type ``v`` and training type ``t``.

    Requires ``t.n == round(c * v.n)``.  The threshold is
    ``lambda - delta_n(v.n)`` in finite-n mode and ``lambda`` in asymptotic
    mode; a nonpositive finite-n threshold empties the acceptance region,
    which is reported through ``degenerate`` rather than as an error.
    """
    if v.k != t.k:
        raise ValueError("alphabet size mismatch between test and training types")
    expected_m = cfg.c * v.n
    if abs(t.n - expected_m) > 0.5 + 1e-9:
        raise ValueError(
            f"training length {t.n} does not match c*n = {expected_m:.3f} "
            "within rounding")
    value, minimizer = statistic(v.pmf(), t.pmf(), cfg.alpha, cfg.c, cfg.variant)
    if cfg.mode == "finite_n":
        threshold = cfg.lam - delta_n(v.n, cfg)
    else:
        threshold = cfg.lam
    degenerate = threshold <= 0.0
    accept = (not degenerate) and value <= threshold
    return DecisionOutcome(
        statistic=value,
        threshold=threshold,
        accept_h0=accept,
        degenerate=degenerate,
        minimizer=minimizer,
    )


def statistic_batch_k2(pv0: np.ndarray, pt0: np.ndarray, alpha: float, c: float,
                       variant: Variant | str) -> np.ndarray:
    """Vectorized binary-alphabet statistic for simulation hot loops.

    ``pv0`` and ``pt0`` are arrays of first-symbol probabilities of the test
    and training types.  Returns the per-pair statistic values (minimizers
    are not materialized).
    """
    _check_alpha_c(alpha, c)
    pv0 = np.asarray(pv0, float)
    pt0 = np.asarray(pt0, float)
    if alpha == 0.0:
        return _h2_vec(pv0, pt0, c)
    if Variant(variant) is Variant.ADDITION:
        cp = (1.0 - alpha) * c
        lo = np.maximum(0.0, (pt0 - alpha) / (1.0 - alpha))
        hi = np.minimum(1.0, pt0 / (1.0 - alpha))
    else:
        cp = c
        lo = np.maximum(0.0, pt0 - alpha)
        hi = np.minimum(1.0, pt0 + alpha)
    return _h2_vec(pv0, np.clip(pv0, lo, hi), cp)
