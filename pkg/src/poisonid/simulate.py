"""Finite-n Monte Carlo validation of the asymptotic theory.

Game trials estimate the two error probabilities under the configured
attack, exponent sweeps track their decay against the analysis module's
asymptotic value, Sanov probes check the large-deviation rate of set
membership for empirical types, and a Hausdorff helper quantifies the
convergence of finite-n region boundaries.

RNG contract
------------
Every trial owns a counter-based Philox stream seeded by
``SeedSequence((seed, domain, trial))`` with domain 0 for H0 trials, 1 for
H1 trials and 2 for Sanov probes, so reports are bit-identical for a given
seed regardless of execution order or parallelism degree.  Within a stream
the test sequence is always drawn before the training sequence.  Test
vectors for this construction are pinned in the test suite.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .attacker import (AttackResult, _attack_nontargeted, _step1,
                       attack_targeted_addition, attack_targeted_replacement)
from .config import GameConfig, Variant
from .defender import decide, statistic_batch_k2
from .pmf import EmpiricalType, Pmf, delta_n, kl_divergence, l1_distance
from .transport import CostMatrix, quantize_map, _largest_remainder

__all__ = [
    "SimulationReport",
    "run_game_trials",
    "exponent_sweep",
    "sanov_probe",
    "hausdorff_distance",
]

CSV_HEADER = "n,trials,p_fp,p_fn,fp_exp,fn_exp,seed"

# Test hook: route binary-alphabet runs through the generic per-trial loop
# instead of the vectorized fast path, so equivalence can be asserted.
_FORCE_GENERIC = False


def _trial_stream(seed: int, domain: int, trial: int) -> np.random.Generator:
    """Philox stream for one trial; see the module docstring."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((seed, domain, trial))))


@dataclass(frozen=True)
class SimulationReport:
    """Empirical error rates and exponents for one (config, n) pair.

    Exponent estimates are ``math.inf`` when the corresponding error count
    is zero: the trial budget only certifies a rate below 1/trials, so no
    finite number is honest.  JSON encodes the censored value as null.
    """

    n: int
    trials: int
    p_fp_hat: float
    p_fn_hat: float
    fp_exponent_hat: float
    fn_exponent_hat: float
    seed: int
    config_echo: GameConfig
    warning: str | None = None

    def __post_init__(self):
        for name in ("p_fp_hat", "p_fn_hat"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {val}")

    def to_json(self) -> str:
        def enc(x: float):
            return None if math.isinf(x) else x

        return json.dumps({
            "n": self.n, "trials": self.trials,
            "p_fp_hat": self.p_fp_hat, "p_fn_hat": self.p_fn_hat,
            "fp_exponent_hat": enc(self.fp_exponent_hat),
            "fn_exponent_hat": enc(self.fn_exponent_hat),
            "seed": self.seed,
            "config_echo": json.loads(self.config_echo.to_json()),
            "warning": self.warning,
        })

    @classmethod
    def from_json(cls, text: str) -> "SimulationReport":
        d = json.loads(text)

        def dec(x) -> float:
            return math.inf if x is None else float(x)

        return cls(n=int(d["n"]), trials=int(d["trials"]),
                   p_fp_hat=float(d["p_fp_hat"]),
                   p_fn_hat=float(d["p_fn_hat"]),
                   fp_exponent_hat=dec(d["fp_exponent_hat"]),
                   fn_exponent_hat=dec(d["fn_exponent_hat"]),
                   seed=int(d["seed"]),
                   config_echo=GameConfig.from_dict(d["config_echo"]),
                   warning=d.get("warning"))

    def to_csv_row(self) -> str:
        def enc(x: float) -> str:
            return "inf" if math.isinf(x) else repr(x)

        return ",".join([str(self.n), str(self.trials),
                         repr(self.p_fp_hat), repr(self.p_fn_hat),
                         enc(self.fp_exponent_hat),
                         enc(self.fn_exponent_hat), str(self.seed)])


def _exponent_estimate(errors: int, trials: int, n: int) -> float:
    if errors == 0:
        return math.inf
    return -math.log2(errors / trials) / n + 0.0  # +0.0 avoids -0.0


def _quantize_pmf(p: Pmf, n: int) -> np.ndarray:
    """Integer counts at denominator n closest to p (largest remainder)."""
    return _largest_remainder(p.probs * n, n)


def _trim_replacement(clean: np.ndarray, desired: np.ndarray,
                      m2: int) -> np.ndarray:
    """Move counts from `clean` toward `desired` rewriting at most m2 samples.

    One overwritten sample decrements one symbol's count and increments
    another's, so the reachable corrupted counts satisfy
    sum(positive part of the difference) <= m2.  When `desired` asks for a
    larger move, units are walked back deterministically from the largest
    outstanding surplus to the largest outstanding deficit (lowest symbol
    index on ties).
    """
    swap = desired.astype(np.int64) - clean.astype(np.int64)
    while int(swap[swap > 0].sum()) > m2:
        j = int(np.argmax(swap))
        i = int(np.argmin(swap))
        swap[j] -= 1
        swap[i] += 1
    return clean + swap


def _training_attack_model(P_X: Pmf, P_Y: Pmf, cfg: GameConfig,
                           cost: CostMatrix) -> AttackResult:
    """Model-based training corruption, shared by H0 and the two-step H1."""
    if cfg.variant is Variant.ADDITION:
        return attack_targeted_addition(P_X, P_Y, cfg, cost)
    return attack_targeted_replacement(P_X, P_Y, cfg, cost)


def _corrupt_training(clean_counts: np.ndarray, fake: Pmf | None,
                      cfg: GameConfig, m: int, m2: int) -> EmpiricalType:
    """Realize the finite-n corrupted training sequence as integer counts."""
    if fake is None or m2 == 0:
        return EmpiricalType(clean_counts, m)
    if cfg.variant is Variant.ADDITION:
        fake_counts = _quantize_pmf(fake, m2)
        return EmpiricalType(clean_counts + fake_counts, m)
    desired = _quantize_pmf(fake, m)
    return EmpiricalType(_trim_replacement(clean_counts, desired, m2), m)


def _deciding_threshold(cfg: GameConfig, n: int) -> float:
    if cfg.mode == "finite_n":
        return cfg.lam - delta_n(n, cfg)
    return cfg.lam


def _quantize_pair(a: float, b: float, total: int) -> int:
    """First entry of the 2-entry largest-remainder rounding of (a, b)."""
    return int(_largest_remainder(np.array([a, b]), total)[0])


def _run_trials_k2(P_X: Pmf, P_Y: Pmf, cfg: GameConfig, cost: CostMatrix,
                   n: int, trials: int, seed: int, m: int, m2: int,
                   clean_len: int, fake_model: Pmf | None,
                   warning: str | None) -> SimulationReport:
    """Binary-alphabet non-targeted fast path.

    Identical semantics to the generic loop — the same per-trial streams
    draw the same counts in the same order, the non-targeted transport's
    column marginal is the budget-clipped pull toward the step-1 target,
    and its quantization at denominator n reduces to a per-row two-entry
    largest-remainder — but the decisions run through the vectorized
    statistic so a 10^5-trial cell costs seconds, not minutes.
    """
    px0, py0 = P_X.probs[0], P_Y.probs[0]
    thr = _deciding_threshold(cfg, n)
    degenerate = thr <= 0.0

    x0 = np.empty(trials, np.int64)
    clean0_h0 = np.empty(trials, np.int64)
    y0 = np.empty(trials, np.int64)
    clean0_h1 = np.empty(trials, np.int64)
    for t in range(trials):
        g = _trial_stream(seed, 0, t)
        x0[t] = g.multinomial(n, P_X.probs)[0]
        clean0_h0[t] = g.multinomial(clean_len, P_X.probs)[0]
        g = _trial_stream(seed, 1, t)
        y0[t] = g.multinomial(n, P_Y.probs)[0]
        clean0_h1[t] = g.multinomial(clean_len, P_X.probs)[0]

    def corrupt0(clean0: np.ndarray) -> np.ndarray:
        if fake_model is None or m2 == 0:
            return clean0
        if cfg.variant is Variant.ADDITION:
            fake0 = int(_largest_remainder(fake_model.probs * m2, m2)[0])
            return clean0 + fake0
        desired0 = int(_largest_remainder(fake_model.probs * m, m)[0])
        return clean0 + np.clip(desired0 - clean0, -m2, m2)

    def count_accepts(pv0: np.ndarray, pt0: np.ndarray) -> int:
        if degenerate:
            return 0
        stats = statistic_batch_k2(pv0, pt0, cfg.alpha, cfg.c, cfg.variant)
        return int(np.count_nonzero(stats <= thr))

    fp = trials - count_accepts(x0 / n, corrupt0(clean0_h0) / m)

    yv0 = y0 / n
    if cfg.L == 0.0:
        a0 = y0.copy()
    else:
        t0 = float(_step1(P_X, P_Y, cfg, cost)[0][0])
        budget = cfg.L / float(cost.d[0, 1])
        z0 = np.clip(np.clip(t0, yv0 - budget, yv0 + budget), 0.0, 1.0)
        # Quantize the two-row transport plan exactly as quantize_map does:
        # row sums are already n-types, so only the off-diagonal mass in the
        # moving row needs the two-entry largest-remainder rounding.
        a0 = np.empty(trials, np.int64)
        for t in range(trials):
            c0 = int(y0[t])
            zz, yy = float(z0[t]), float(yv0[t])
            if zz <= yy:
                a0[t] = _quantize_pair(zz * n, (yy - zz) * n, c0)
            else:
                a0[t] = c0 + _quantize_pair((zz - yy) * n, (1.0 - zz) * n,
                                            n - c0)
    fn = count_accepts(a0 / n, corrupt0(clean0_h1) / m)

    return SimulationReport(
        n=n, trials=trials,
        p_fp_hat=fp / trials, p_fn_hat=fn / trials,
        fp_exponent_hat=_exponent_estimate(fp, trials, n),
        fn_exponent_hat=_exponent_estimate(fn, trials, n),
        seed=seed, config_echo=cfg, warning=warning)


def run_game_trials(P_X: Pmf, P_Y: Pmf, cfg: GameConfig, cost: CostMatrix,
                    n: int, trials: int, seed: int) -> SimulationReport:
    """Monte Carlo estimate of both error probabilities at test length n.

    Under H0 the test sequence is drawn from P_X and only the training set
    is attacked; a rejection is a false positive.  Under H1 the test comes
    from P_Y, the configured attack corrupts training and distorts the test
    within the budget, and an acceptance is a false negative.  The attacked
    test type is realized as an actual length-n sequence (the transport map
    is quantized at denominator n) before the decision.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    if P_X.k != P_Y.k or P_X.k != cost.k:
        raise ValueError("alphabet size mismatch")
    m, m1, m2 = cfg.m(n), cfg.m1(n), cfg.m2(n)
    if m < 1:
        raise ValueError(f"round(c*n) = {m} training samples; need >= 1")
    warning = None
    if cfg.alpha > 0.0 and m2 == 0:
        warning = (f"alpha={cfg.alpha:g} rounds to zero corrupted samples "
                   f"at m={m}; the attack degenerates to no corruption")

    clean_len = m1 if cfg.variant is Variant.ADDITION else m
    model_attack = None
    if cfg.alpha > 0.0 and m2 > 0:
        model_attack = _training_attack_model(P_X, P_Y, cfg, cost)
    fake_model = model_attack.fake_training if model_attack else None
    targeted = cfg.attack == "targeted"

    if (P_X.k == 2 and not targeted and float(cost.d[0, 1]) > 0.0
            and not _FORCE_GENERIC):
        return _run_trials_k2(P_X, P_Y, cfg, cost, n, trials, seed, m, m2,
                              clean_len, fake_model, warning)

    fp = 0
    for t in range(trials):
        g = _trial_stream(seed, 0, t)
        x_counts = g.multinomial(n, P_X.probs)
        clean = g.multinomial(clean_len, P_X.probs)
        training = _corrupt_training(clean, fake_model, cfg, m, m2)
        outcome = decide(EmpiricalType(x_counts, n), training, cfg)
        fp += 0 if outcome.accept_h0 else 1

    fn = 0
    for t in range(trials):
        g = _trial_stream(seed, 1, t)
        y_counts = g.multinomial(n, P_Y.probs)
        clean = g.multinomial(clean_len, P_X.probs)
        observed = EmpiricalType(y_counts, n).pmf()
        if targeted:
            clean_pmf = EmpiricalType(clean, clean_len).pmf()
            if cfg.variant is Variant.ADDITION:
                atk = attack_targeted_addition(clean_pmf, observed, cfg, cost)
            else:
                atk = attack_targeted_replacement(clean_pmf, observed, cfg,
                                                  cost)
            fake = atk.fake_training
        else:
            atk = _attack_nontargeted(P_X, P_Y, observed, cfg, cost)
            fake = fake_model
        training = _corrupt_training(clean, fake if m2 > 0 else None,
                                     cfg, m, m2)
        plan = quantize_map(atk.transport, n)
        attacked_counts = np.rint(plan.s.sum(axis=0) * n).astype(np.int64)
        outcome = decide(EmpiricalType(attacked_counts, n), training, cfg)
        fn += 1 if outcome.accept_h0 else 0

    return SimulationReport(
        n=n, trials=trials,
        p_fp_hat=fp / trials, p_fn_hat=fn / trials,
        fp_exponent_hat=_exponent_estimate(fp, trials, n),
        fn_exponent_hat=_exponent_estimate(fn, trials, n),
        seed=seed, config_echo=cfg, warning=warning)


def exponent_sweep(P_X: Pmf, P_Y: Pmf, cfg: GameConfig, cost: CostMatrix,
                   n_list: Sequence[int], trials: int,
                   seed: int) -> list[SimulationReport]:
    """One report per test length, sharing the seed across lengths."""
    ns = list(n_list)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_list must be strictly ascending")
    return [run_game_trials(P_X, P_Y, cfg, cost, n, trials, seed)
            for n in ns]


def _min_divergence_over_set(P: Pmf,
                             set_predicate: Callable[[Pmf], bool]) -> float:
    """min D(Q || P) over the predicate's set, by grid search plus local
    refinement.  Black-box membership admits no better generic scheme, which
    caps the supported alphabet size at 3."""
    k = P.k
    if k == 2:
        steps = 200000
        best = math.inf
        q1 = np.linspace(0.0, 1.0, steps + 1)
        for v in q1:
            q = Pmf(np.array([1.0 - v, v]))
            if set_predicate(q):
                best = min(best, kl_divergence(q, P))
        return best
    if k == 3:
        def scan(center: np.ndarray, half: float, steps: int) -> tuple:
            best, best_q = math.inf, None
            a = np.linspace(max(0.0, center[0] - half),
                            min(1.0, center[0] + half), steps + 1)
            b = np.linspace(max(0.0, center[1] - half),
                            min(1.0, center[1] + half), steps + 1)
            for q0 in a:
                for q1 in b:
                    q2 = 1.0 - q0 - q1
                    if q2 < -1e-12:
                        continue
                    q = Pmf(np.array([q0, q1, max(q2, 0.0)]))
                    if set_predicate(q):
                        d = kl_divergence(q, P)
                        if d < best:
                            best, best_q = d, q.probs
            return best, best_q

        best, best_q = scan(np.array([0.5, 0.5]), 0.5, 150)
        if best_q is None:
            return math.inf
        for half, steps in ((1.5 / 150, 60), (1.5 * (1.5 / 150) / 60, 60)):
            ref, ref_q = scan(best_q, half, steps)
            if ref_q is not None and ref < best:
                best, best_q = ref, ref_q
        return best
    raise ValueError("divergence bound over a black-box set is only "
                     "supported for alphabet sizes 2 and 3")


def sanov_probe(P: Pmf, set_predicate: Callable[[Pmf], bool],
                n_list: Sequence[int], trials: int,
                seed: int) -> list[tuple[int, float, float]]:
    """Empirical large-deviation rate of {type in set} versus the
    divergence bound min D(Q || P) over the set.

    Returns (n, empirical_exponent, divergence_bound) per n; a zero hit
    count censors the empirical entry to math.inf.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    bound = _min_divergence_over_set(P, set_predicate)
    out = []
    for n in n_list:
        if n < 1:
            raise ValueError(f"n values must be >= 1, got {n}")
        hits = 0
        for t in range(trials):
            g = _trial_stream(seed, 2, t)
            counts = g.multinomial(n, P.probs)
            if set_predicate(EmpiricalType(counts, n).pmf()):
                hits += 1
        out.append((n, _exponent_estimate(hits, trials, n), bound))
    return out


def hausdorff_distance(A: Sequence[Pmf], B: Sequence[Pmf]) -> float:
    """max-min l1 distance between two finite sets of pmfs (symmetrized)."""
    if len(A) == 0 or len(B) == 0:
        raise ValueError("hausdorff_distance requires nonempty sets")
    d_ab = max(min(l1_distance(a, b) for b in B) for a in A)
    d_ba = max(min(l1_distance(a, b) for a in A) for b in B)
    return max(d_ab, d_ba)
