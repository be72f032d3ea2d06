"""Asymptotic characterizations of the identification game.

Everything here is a statement about pmfs, not samples: membership in the
indistinguishability regions, the corruption level that blinds the defender
outright, the distortion budget (security margin) the attacker needs on top
of a given corruption level, and the equilibrium false-negative exponent.

The cleaned-training ball radius is ``2*alpha/(1-alpha)`` in the addition
model and ``4*alpha`` in the replacement model; the matching h parameters
are ``(1-alpha)*c`` and ``c``.  These two numbers are the only thing that
distinguishes the variants throughout this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacker import (
    _joint_solve,
    _min_h_over_wset,
    _wset_interval_k2,
    _wset_targeted,
)
from .config import GameConfig, Variant
from .defender import _h_and_grad, _h2_vec
from .lp import simplex_solve
from .optimize import golden_section, projected_gradient
from .pmf import Pmf, l1_distance
from .projections import (
    _project_l1_ball_origin,
    dykstra,
    project_simplex,
)
from .transport import CostMatrix, emd

__all__ = [
    "SecurityMarginResult",
    "ExponentResult",
    "gamma0_membership",
    "gamma_membership",
    "indist_membership",
    "blinding_level",
    "security_margin",
    "error_exponent",
]

_MEMBER_TOL = 1e-9
_LN2_INV = 1.0 / np.log(2.0)


def region_radius(alpha: float, variant: Variant | str) -> float:
    """L1 radius of the cleaned-training ball around the clean pmf."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if Variant(variant) is Variant.ADDITION:
        return 2.0 * alpha / (1.0 - alpha)
    return 4.0 * alpha


def _variant_param(alpha: float, c: float, variant: Variant) -> float:
    return (1.0 - alpha) * c if variant is Variant.ADDITION else c


@dataclass(frozen=True)
class SecurityMarginResult:
    """Distortion budget needed to reach the acceptance region.

    ``margin`` is the smallest L for which some V within EMD L of P_Y lands
    inside the zero-threshold region around P_X; ``witness_V`` is such a V.
    ``at_blinding`` flags the degenerate case where the corruption level
    alone suffices (margin 0).
    """

    margin: float
    alpha_blinding: float
    at_blinding: bool
    witness_V: Pmf

    def to_json(self) -> str:
        import json

        return json.dumps({
            "margin": self.margin,
            "alpha_blinding": self.alpha_blinding,
            "at_blinding": self.at_blinding,
            "witness": [float(x) for x in self.witness_V.probs],
        })


@dataclass(frozen=True)
class ExponentResult:
    """False-negative error exponent with its optimizing pair.

    ``label`` is "exact" when the underlying program is the lambda = 0 one
    whose convexity the source analysis establishes, and "best found" for
    lambda > 0 where only the best value across restarts is claimed.
    """

    exponent: float
    minimizer_R: Pmf
    minimizer_P: Pmf
    label: str

    def to_json(self) -> str:
        import json

        return json.dumps({
            "exponent": self.exponent,
            "minimizer_R": [float(x) for x in self.minimizer_R.probs],
            "minimizer_P": [float(x) for x in self.minimizer_P.probs],
            "label": self.label,
        })


# ---------------------------------------------------------------------------
# region membership


def gamma0_membership(P: Pmf, R: Pmf, lam: float, alpha: float, c: float,
                      variant: Variant | str) -> bool:
    """Membership of P in the zero-distortion region around R.

    At lambda = 0 this is the closed-form L1 ball test; for lambda > 0 the
    defining feasibility program (can training corruption bring the cleaned
    pmf within statistic lambda of P?) is solved directly.  The two paths
    agree as lambda -> 0.
    """
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    variant = Variant(variant)
    if P.k != R.k:
        raise ValueError("alphabet size mismatch")
    if lam == 0.0:
        return l1_distance(P, R) <= region_radius(alpha, variant) + _MEMBER_TOL
    param = _variant_param(alpha, c, variant)
    if alpha == 0.0:
        val, _ = _h_and_grad(P.probs, R.probs, param)
        return val <= lam + _MEMBER_TOL
    wset = _wset_targeted(R.probs, alpha, variant)
    if P.k == 2:
        lo, hi = _wset_interval_k2(wset)
        # h2(p, .) is convex and zero at p, so the interval minimum is at
        # the clipped point
        val = float(_h2_vec(P.probs[0], min(max(P.probs[0], lo), hi), param))
    else:
        val, _ = _min_h_over_wset(P.probs, wset, param)
    return val <= lam + _MEMBER_TOL


def gamma_membership(P: Pmf, R: Pmf, lam: float, alpha: float, c: float,
                     L: float, cost: CostMatrix,
                     variant: Variant | str) -> bool:
    """Membership in the distortion-enlarged region Gamma(R, lambda, alpha, L).

    P is a member iff some V within EMD L of P lies in the zero-distortion
    region, which is exactly the question "can a joint test/training attack
    push the defender statistic at (P, R) to lambda or below".
    """
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    variant = Variant(variant)
    if L == 0.0:
        return gamma0_membership(P, R, lam, alpha, c, variant)
    if lam == 0.0:
        val, _ = _min_l1_within_emd(P, R.probs, L, cost)
        return val <= region_radius(alpha, variant) + _MEMBER_TOL
    wset = _wset_targeted(R.probs, alpha, variant)
    val, _, _ = _joint_solve(P.probs, cost, L, wset,
                             _variant_param(alpha, c, variant))
    return val <= lam + _MEMBER_TOL


def _min_l1_within_emd(P: Pmf, target: np.ndarray, L: float,
                       cost: CostMatrix) -> tuple[float, np.ndarray]:
    """min over V of l1(V, target) s.t. EMD(P, V) <= L, with a witness V.

    Single LP over the joint (transport, V) polytope; the l1 objective is
    linearized with one absolute-value auxiliary per symbol.
    """
    p = P.probs
    k = p.size
    if k == 2:
        d01 = float(cost.d[0, 1])
        budget = (L / d01) if d01 > 0.0 else 1.0
        v0 = float(np.clip(target[0], p[0] - budget, p[0] + budget))
        v0 = min(max(v0, 0.0), 1.0)
        v = np.array([v0, 1.0 - v0])
        return float(np.abs(v - target).sum()), v
    # variables: S (k^2), t (k), u (k), w (k), distortion slack (1)
    nv = k * k + 3 * k + 1
    cvec = np.zeros(nv)
    cvec[k * k:k * k + k] = 1.0
    rows, rhs = [], []
    for i in range(k):
        r = np.zeros(nv)
        r[i * k:(i + 1) * k] = 1.0
        rows.append(r)
        rhs.append(p[i])
    for j in range(k):
        r = np.zeros(nv)
        r[j:k * k:k] = 1.0
        r[k * k + j] = -1.0
        r[k * k + k + j] = 1.0
        rows.append(r)
        rhs.append(target[j])
    for j in range(k):
        r = np.zeros(nv)
        r[j:k * k:k] = -1.0
        r[k * k + j] = -1.0
        r[k * k + 2 * k + j] = 1.0
        rows.append(r)
        rhs.append(-target[j])
    r = np.zeros(nv)
    r[:k * k] = cost.d.ravel()
    r[-1] = 1.0
    rows.append(r)
    rhs.append(L)
    x, value = simplex_solve(cvec, np.array(rows), np.array(rhs))
    v = x[:k * k].reshape(k, k).sum(axis=0)
    v = np.maximum(v, 0.0)
    total = v.sum()
    if total > 0.0:
        v = v / total
    return float(value), v


def indist_membership(P: Pmf, P_X: Pmf, cfg: GameConfig,
                      cost: CostMatrix) -> bool:
    """Zero-threshold membership with distortion: is P indistinguishable?

    Tests min over V with EMD(P, V) <= L of l1(V, P_X) against the variant
    radius.  With L = 0 this reduces to the plain ball test.
    """
    if P.k != P_X.k:
        raise ValueError("alphabet size mismatch")
    threshold = region_radius(cfg.alpha, cfg.variant)
    if cfg.L == 0.0:
        return l1_distance(P, P_X) <= threshold + _MEMBER_TOL
    value, _ = _min_l1_within_emd(P, P_X.probs, cfg.L, cost)
    return value <= threshold + _MEMBER_TOL


def blinding_level(P_X: Pmf, P_Y: Pmf, variant: Variant | str) -> float:
    """Corruption fraction above which the regions swallow the other source.

    Addition: d/(2+d); replacement: d/4, with d the L1 distance.  Symmetric,
    and both evaluate to 1/2 exactly when the supports are disjoint (d = 2).
    """
    if P_X.k != P_Y.k:
        raise ValueError("alphabet size mismatch")
    d = l1_distance(P_X, P_Y)
    if Variant(variant) is Variant.ADDITION:
        return d / (2.0 + d)
    return d / 4.0


def security_margin(P_X: Pmf, P_Y: Pmf, alpha: float, cost: CostMatrix,
                    variant: Variant | str) -> SecurityMarginResult:
    """Smallest distortion budget that blinds the defender at level alpha.

    Bisection over the monotone non-increasing map
    L -> min_{V : EMD(P_Y, V) <= L} l1(V, P_X), compared with the variant
    radius; the bracket right end EMD(P_X, P_Y) always suffices (V = P_X).
    Symmetric in its pmf arguments for symmetric costs.
    """
    variant = Variant(variant)
    if not 0.0 <= alpha <= 0.5:
        raise ValueError(f"alpha must lie in [0, 1/2] for margins, got {alpha}")
    if P_X.k != P_Y.k:
        raise ValueError("alphabet size mismatch")
    threshold = region_radius(alpha, variant)
    ab = blinding_level(P_X, P_Y, variant)
    if l1_distance(P_Y, P_X) <= threshold + 1e-12:
        return SecurityMarginResult(margin=0.0, alpha_blinding=ab,
                                    at_blinding=True, witness_V=P_Y)
    hi, _ = emd(P_X, P_Y, cost)
    lo = 0.0
    _, witness = _min_l1_within_emd(P_Y, P_X.probs, hi, cost)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        val, v = _min_l1_within_emd(P_Y, P_X.probs, mid, cost)
        if val <= threshold + 1e-12:
            hi, witness = mid, v
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return SecurityMarginResult(margin=hi, alpha_blinding=ab,
                                at_blinding=False, witness_V=Pmf(witness))


# ---------------------------------------------------------------------------
# error exponent


def _kl_grad(p: np.ndarray, ref: np.ndarray) -> tuple[float, np.ndarray]:
    """D(p || ref) in bits and its gradient, with boundary clamps."""
    safe_p = np.maximum(p, 1e-300)
    safe_r = np.maximum(ref, 1e-300)
    ratio = np.log2(safe_p / safe_r)
    val = float(np.sum(np.where(p > 0.0, p * ratio, 0.0)))
    if np.any((ref <= 0.0) & (p > 1e-12)):
        val = np.inf
    return val, ratio + _LN2_INV


def _exponent_k2(px: np.ndarray, py: np.ndarray, alpha: float, lam: float,
                 c: float, L: float, cost: CostMatrix,
                 variant: Variant) -> tuple[float, np.ndarray, np.ndarray]:
    """Binary-alphabet exponent via interval geometry.

    For fixed clean-training pmf R the reachable attacked set is an interval
    of first-symbol probabilities; the inner divergence minimum is therefore
    attained either at P_Y itself (exponent contribution zero) or at the
    interval endpoint nearest to it, located by bisection on the convex
    statistic.  The outer minimization over R is convex and solved by golden
    section.
    """
    mult = (1.0 - alpha) * c if variant is Variant.ADDITION else c
    param = _variant_param(alpha, c, variant)
    rho = region_radius(alpha, variant)
    d01 = float(cost.d[0, 1])
    budget = (L / d01) if d01 > 0.0 else (1.0 if L > 0.0 else 0.0)

    def g_of_v(v0: float, wlo: float, whi: float) -> float:
        # h2(v, .) is convex with a zero at w = v, so the interval minimum
        # sits at the projection of v onto [wlo, whi]
        return float(_h2_vec(v0, min(max(v0, wlo), whi), param))

    def inner(r0: float) -> tuple[float, float]:
        """(min divergence to P_Y over the member interval, member p)."""
        wlo = max(0.0, r0 - rho / 2.0)
        whi = min(1.0, r0 + rho / 2.0)
        zlo = max(0.0, wlo - budget)
        zhi = min(1.0, whi + budget)
        if zlo - 1e-15 <= py[0] <= zhi + 1e-15:
            return 0.0, py[0]
        if py[0] > zhi:
            edge, anchor, sgn = zhi, whi, +1.0
        else:
            edge, anchor, sgn = zlo, wlo, -1.0
        if lam > 0.0:
            # widen the member interval: find v with g(v) = lam beyond the
            # zero stretch, then add the transport budget
            a, b = anchor, py[0] - sgn * budget
            if sgn * (b - a) <= 0.0:
                return 0.0, py[0]
            if g_of_v(b, wlo, whi) <= lam:
                return 0.0, py[0]
            for _ in range(80):
                m = 0.5 * (a + b)
                if g_of_v(m, wlo, whi) <= lam:
                    a = m
                else:
                    b = m
            edge = min(max(a + sgn * budget, 0.0), 1.0)
        member_p = np.array([edge, 1.0 - edge])
        return _kl_grad(member_p, py)[0], edge

    def outer(r0: float) -> float:
        r = np.array([r0, 1.0 - r0])
        return mult * _kl_grad(r, px)[0] + inner(r0)[0]

    r_star, val = golden_section(outer, 0.0, 1.0)
    _, p_edge = inner(r_star)
    return (max(val, 0.0), np.array([r_star, 1.0 - r_star]),
            np.array([p_edge, 1.0 - p_edge]))


def _project_pair_ball(a0: np.ndarray, b0: np.ndarray,
                       radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Project (a0, b0) onto {(a, b) : |a - b|_1 <= radius}.

    Decomposes into the invariant sum s = a + b and the difference d = a - b,
    which is independently projected onto the l1 ball.
    """
    s = a0 + b0
    d = _project_l1_ball_origin(a0 - b0, radius)
    return 0.5 * (s + d), 0.5 * (s - d)


def _exponent_joint(px: np.ndarray, py: np.ndarray, alpha: float, lam: float,
                    c: float, L: float, cost: CostMatrix, variant: Variant,
                    restarts: int = 20,
                    ) -> tuple[float, np.ndarray, np.ndarray]:
    """General-alphabet exponent: one jointly convex program.

    Variables are the clean-training pmf R, the clean-test pmf P (or a full
    transport map S when L > 0, with P its row marginal and the attacked pmf
    V its column marginal), and for lambda > 0 a cleaned-training pmf W.
    The single nonlinear constraint h(V, W) <= lambda is enforced with an
    augmented Lagrangian; everything else is handled by Dykstra projections.
    """
    k = px.size
    # floor the reference pmfs so zero-support symbols give a steep but
    # finite divergence wall instead of an infinite one the line search
    # cannot cross; the induced value shift is O(1e-11)
    px = np.maximum(px, 1e-12)
    px = px / px.sum()
    py = np.maximum(py, 1e-12)
    py = py / py.sum()
    mult = (1.0 - alpha) * c if variant is Variant.ADDITION else c
    param = _variant_param(alpha, c, variant)
    rho = region_radius(alpha, variant)
    use_transport = L > 0.0
    nS = k * k if use_transport else k
    dvec = cost.d.ravel()

    def unpack(x):
        if lam > 0.0:
            return x[:k], x[k:k + nS], x[k + nS:]
        return x[:k], x[k:k + nS], None

    def v_of(s_block):
        if use_transport:
            return s_block.reshape(k, k).sum(axis=0)
        return s_block

    def p_of(s_block):
        if use_transport:
            return s_block.reshape(k, k).sum(axis=1)
        return s_block

    if lam > 0.0:
        def proj_rw_simplexes(y):
            return np.concatenate([project_simplex(y[:k]),
                                   project_simplex(y[k:])])

        def proj_rw_ball(y):
            w_new, r_new = _project_pair_ball(y[k:], y[:k], rho)
            return np.concatenate([r_new, w_new])

        def project(x, sweeps=80):
            out = x.copy()
            out[k:k + nS] = project_simplex(x[k:k + nS])
            rw = dykstra(np.concatenate([x[:k], x[k + nS:]]),
                         [proj_rw_simplexes, proj_rw_ball], iters=sweeps)
            out[:k] = rw[:k]
            out[k + nS:] = rw[k:]
            return out
    else:
        def proj_r(y):
            out = y.copy()
            out[:k] = project_simplex(y[:k])
            return out

        def proj_s(y):
            out = y.copy()
            out[k:k + nS] = project_simplex(y[k:k + nS])
            return out

        def proj_couple(y):
            # |V - R|_1 <= rho, V a linear image of the S block
            out = y.copy()
            r0 = y[:k]
            s0 = y[k:k + nS]
            y0 = v_of(s0)
            u = _project_l1_ball_origin(y0 - r0, rho)
            if use_transport:
                r_new = (k * r0 + y0 - u) / (k + 1.0)
                shift = (u + r_new - y0) / k
                out[:k] = r_new
                out[k:k + nS] = (s0.reshape(k, k) + shift[None, :]).ravel()
            else:
                a, b = _project_pair_ball(s0, r0, rho)
                out[k:k + nS] = a
                out[:k] = b
            return out

        def project(x, sweeps=200):
            return dykstra(x, [proj_r, proj_s, proj_couple], iters=sweeps)

    def project_s_budget(s, sweeps=150):
        """Exact projection of the S block onto {simplex, <S,d> <= L}."""
        def onto_simplex(y):
            return project_simplex(y)

        def onto_halfspace(y):
            excess = float(y @ dvec) - L
            if excess <= 0.0:
                return y
            return y - dvec * (excess / float(dvec @ dvec))

        return dykstra(s, [onto_simplex, onto_halfspace], iters=sweeps)

    state = {"mu": 16.0, "u_h": 0.0, "u_d": 0.0}
    pen_h = lam > 0.0
    pen_d = use_transport

    def fun(x):
        r, s, w = unpack(x)
        val = mult * _kl_grad(np.maximum(r, 0.0), px)[0]
        val += _kl_grad(np.maximum(p_of(s), 0.0), py)[0]
        if pen_h:
            hval = _h_and_grad(np.maximum(v_of(s), 0.0),
                               np.maximum(w, 0.0), param)[0]
            viol = max(0.0, state["u_h"] / state["mu"] + (hval - lam))
            val += 0.5 * state["mu"] * viol * viol
        if pen_d:
            viol = max(0.0, state["u_d"] / state["mu"]
                       + (float(s @ dvec) - L))
            val += 0.5 * state["mu"] * viol * viol
        return val

    def grad(x):
        r, s, w = unpack(x)
        g = np.zeros_like(x)
        g[:k] = mult * _kl_grad(np.maximum(r, 0.0), px)[1]
        gp = _kl_grad(np.maximum(p_of(s), 0.0), py)[1]
        if use_transport:
            g[k:k + nS] = np.tile(gp[:, None], (1, k)).ravel()
        else:
            g[k:k + nS] = gp
        if pen_h:
            v = np.maximum(v_of(s), 0.0)
            wv = np.maximum(w, 0.0)
            hval, gw = _h_and_grad(v, wv, param)
            viol = max(0.0, state["u_h"] / state["mu"] + (hval - lam))
            if viol > 0.0:
                scale = state["mu"] * viol
                u_mix = (v + param * wv) / (1.0 + param)
                gv = np.log2(np.maximum(v, 1e-300)
                             / np.maximum(u_mix, 1e-300))
                gv[u_mix <= 0.0] = 0.0
                if use_transport:
                    g[k:k + nS] += scale * np.tile(gv, (k, 1)).ravel()
                else:
                    g[k:k + nS] += scale * gv
                g[k + nS:] += scale * gw
        if pen_d:
            viol = max(0.0, state["u_d"] / state["mu"]
                       + (float(s @ dvec) - L))
            if viol > 0.0:
                g[k:k + nS] += state["mu"] * viol * dvec
        return g

    rng = np.random.default_rng(0)
    best = (np.inf, None, None)
    for trial in range(restarts):
        if trial == 0:
            r0, s0 = px.copy(), py.copy()
        elif trial == 1:
            r0 = px.copy()
            s0 = project_simplex(0.5 * (px + py))
        else:
            r0 = rng.dirichlet(np.ones(k))
            s0 = rng.dirichlet(np.ones(k))
        s_init = (np.outer(s0, s0).ravel() if use_transport else s0)
        blocks = [r0, s_init]
        if lam > 0.0:
            blocks.append(r0.copy())
        x = project(np.concatenate(blocks))
        if pen_h or pen_d:
            state["mu"], state["u_h"], state["u_d"] = 64.0, 0.0, 0.0
            for round_i in range(8):
                # loose subproblem solves while the multipliers move, tight
                # ones once the constraint gaps are nearly closed
                loose = round_i < 5
                x, _ = projected_gradient(fun, grad, project, x,
                                          max_iters=700 if loose else 1500,
                                          improve_tol=1e-8 if loose
                                          else 1e-10)
                r, s, w = unpack(x)
                gap_h = gap_d = 0.0
                if pen_h:
                    hval = _h_and_grad(np.maximum(v_of(s), 0.0),
                                       np.maximum(w, 0.0), param)[0]
                    gap_h = hval - lam
                    state["u_h"] = max(0.0, state["u_h"]
                                       + state["mu"] * gap_h)
                if pen_d:
                    gap_d = float(s @ dvec) - L
                    state["u_d"] = max(0.0, state["u_d"]
                                       + state["mu"] * gap_d)
                if max(gap_h, gap_d) <= 1e-9:
                    break
                if state["mu"] < 8192.0:
                    state["mu"] *= 8.0
        else:
            x, _ = projected_gradient(fun, grad, project, x, max_iters=3000)
        x = project(x, sweeps=400)
        r, s, w = unpack(x)
        if use_transport:
            s = project_s_budget(s)
        p = np.maximum(p_of(s), 0.0)
        p = p / p.sum()
        r = np.maximum(r, 0.0)
        r = r / r.sum()
        val = mult * _kl_grad(r, px)[0] + _kl_grad(p, py)[0]
        if lam > 0.0:
            # only count the run if the h constraint actually holds
            hval = _h_and_grad(np.maximum(v_of(s), 0.0),
                               np.maximum(w, 0.0), param)[0]
            if hval > lam + 1e-6:
                continue
        if val < best[0] - 1e-12:
            best = (val, r, p)
    if best[1] is None:  # pragma: no cover - all restarts infeasible
        raise RuntimeError("exponent solver failed to find a feasible point")
    return max(best[0], 0.0), best[1], best[2]


def error_exponent(P_X: Pmf, P_Y: Pmf, cfg: GameConfig,
                   cost: CostMatrix) -> ExponentResult:
    """Equilibrium false-negative exponent (bits per test sample).

    Minimizes ``mult * D(R || P_X) + D(P || P_Y)`` over clean training pmfs R
    and clean test pmfs P whose attacked image can sit inside the acceptance
    region at threshold lambda, where mult is ``(1-alpha)*c`` for addition
    (only the kept samples are clean draws) and ``c`` for replacement (all m
    samples are drawn before the overwrite).  Zero exactly when P_Y is a
    member of Gamma(P_X, lambda, alpha, L).
    """
    if P_X.k != P_Y.k:
        raise ValueError("alphabet size mismatch")
    px = P_X.probs
    py = P_Y.probs
    variant = cfg.variant
    if gamma_membership(P_Y, P_X, cfg.lam, cfg.alpha, cfg.c, cfg.L, cost,
                        variant):
        return ExponentResult(exponent=0.0, minimizer_R=P_X, minimizer_P=P_Y,
                              label="exact" if cfg.lam == 0.0 else "best found")
    if px.size == 2:
        val, r, p = _exponent_k2(px, py, cfg.alpha, cfg.lam, cfg.c, cfg.L,
                                 cost, variant)
    else:
        val, r, p = _exponent_joint(px, py, cfg.alpha, cfg.lam, cfg.c, cfg.L,
                                    cost, variant)
    return ExponentResult(exponent=val, minimizer_R=Pmf(r), minimizer_P=Pmf(p),
                          label="exact" if cfg.lam == 0.0 else "best found")
