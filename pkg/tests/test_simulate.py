import json
import math

import numpy as np
import pytest
import scipy.stats as sps

import poisonid.simulate as sim
from poisonid.config import GameConfig, Variant
from poisonid.defender import statistic_batch_k2
from poisonid.pmf import Pmf, delta_n, kl_divergence
from poisonid.simulate import (SimulationReport, exponent_sweep,
                               hausdorff_distance, run_game_trials,
                               sanov_probe)
from poisonid.transport import CostMatrix

COST2 = CostMatrix.absolute(2)


def cfg(k=2, **kw) -> GameConfig:
    base = dict(alpha=0.0, lam=0.05, c=1.0, L=0.0,
                variant=Variant.ADDITION, alphabet_size=k, mode="asymptotic")
    base.update(kw)
    return GameConfig(**base)


# ---------------------------------------------------------------------------
# RNG contract


def test_trial_stream_frozen_vectors():
    g = sim._trial_stream(7, 0, 3)
    assert g.multinomial(10, [0.5, 0.5]).tolist() == [8, 2]
    assert g.multinomial(6, [0.2, 0.3, 0.5]).tolist() == [3, 0, 3]
    assert sim._trial_stream(7, 1, 0).multinomial(10, [0.5, 0.5]).tolist() == [7, 3]


def test_reports_are_deterministic():
    a = cfg(alpha=0.1, lam=0.1, L=0.1)
    r1 = run_game_trials(Pmf([0.7, 0.3]), Pmf([0.3, 0.7]), a, COST2, 60, 400, 11)
    r2 = run_game_trials(Pmf([0.7, 0.3]), Pmf([0.3, 0.7]), a, COST2, 60, 400, 11)
    assert r1.to_json() == r2.to_json()
    r3 = run_game_trials(Pmf([0.7, 0.3]), Pmf([0.3, 0.7]), a, COST2, 60, 400, 12)
    assert r3.to_json() != r1.to_json()


def test_fast_path_matches_generic_loop(monkeypatch):
    configs = [
        cfg(),
        cfg(alpha=0.15, lam=0.08),
        cfg(alpha=0.15, lam=0.08, variant="replacement"),
        cfg(alpha=0.1, lam=0.1, L=0.12),
        cfg(alpha=0.1, lam=0.1, L=0.12, variant="replacement"),
        cfg(alpha=0.2, lam=0.3, L=0.05, mode="finite_n", c=1.5),
        cfg(alpha=0.05, lam=0.25, mode="finite_n", variant="replacement"),
    ]
    px, py = Pmf([0.75, 0.25]), Pmf([0.35, 0.65])
    for a in configs:
        fast = run_game_trials(px, py, a, COST2, 50, 300, 5)
        monkeypatch.setattr(sim, "_FORCE_GENERIC", True)
        slow = run_game_trials(px, py, a, COST2, 50, 300, 5)
        monkeypatch.setattr(sim, "_FORCE_GENERIC", False)
        assert fast.to_json() == slow.to_json()


# ---------------------------------------------------------------------------
# estimates against exact finite-n error probabilities


def exact_error_probs(px0, py0, n, lam):
    """Clean-game (alpha=0, L=0) error probabilities by enumerating the
    41x41 grid of test/training counts with exact binomial weights."""
    i = np.arange(n + 1)
    stat = statistic_batch_k2(np.repeat(i / n, n + 1),
                              np.tile(i / n, n + 1), 0.0, 1.0,
                              "addition").reshape(n + 1, n + 1)
    accept = stat <= lam
    w_test_h0 = sps.binom.pmf(i, n, px0)
    w_test_h1 = sps.binom.pmf(i, n, py0)
    w_train = sps.binom.pmf(i, n, px0)
    p_fp = float(w_test_h0 @ (~accept) @ w_train)
    p_fn = float(w_test_h1 @ accept @ w_train)
    return p_fp, p_fn


def test_error_rates_match_exact_enumeration():
    px, py, n, lam, trials = 0.7, 0.45, 40, 0.03, 20000
    want_fp, want_fn = exact_error_probs(px, py, n, lam)
    rep = run_game_trials(Pmf([px, 1 - px]), Pmf([py, 1 - py]),
                          cfg(lam=lam), COST2, n, trials, 97)
    for got, want in ((rep.p_fp_hat, want_fp), (rep.p_fn_hat, want_fn)):
        se = math.sqrt(want * (1.0 - want) / trials)
        assert abs(got - want) <= 4.0 * se + 1e-12


def test_identical_sources_confuse_the_test():
    p = Pmf([0.6, 0.4])
    rep = run_game_trials(p, p, cfg(lam=0.2), COST2, 200, 500, 3)
    assert rep.p_fn_hat > 0.95                # H1 is indistinguishable
    assert rep.p_fp_hat < 0.05
    assert rep.fn_exponent_hat < 0.001


def test_disjoint_supports_never_fool_the_test():
    px, py = Pmf([1.0, 0.0]), Pmf([0.0, 1.0])
    rep = run_game_trials(px, py, cfg(lam=0.05), COST2, 50, 300, 1)
    assert rep.p_fn_hat == 0.0
    assert math.isinf(rep.fn_exponent_hat)    # censored: no errors observed
    assert rep.p_fp_hat == 0.0                # identical types, statistic 0


def test_fp_rate_respects_finite_n_threshold():
    # lambda above delta_n: acceptance window (lambda - delta_n) must keep
    # the false-positive rate under the large-deviation budget
    a = cfg(lam=0.14, mode="finite_n")
    n = 400
    gap = 0.14 - delta_n(n, a)
    assert gap > 0.0
    rep = run_game_trials(Pmf([0.5, 0.5]), Pmf([0.3, 0.7]), a, COST2, n, 4000, 2)
    bound = 2.0 ** (-n * gap)
    se = math.sqrt(max(bound * (1 - bound), 1e-12) / 4000)
    assert rep.p_fp_hat <= bound + 4.0 * se + 1e-9


def test_degenerate_threshold_rejects_everything():
    a = cfg(lam=0.05, mode="finite_n")  # delta_n(100) ~ 0.13 > lambda
    rep = run_game_trials(Pmf([0.6, 0.4]), Pmf([0.6, 0.4]), a, COST2,
                          100, 200, 9)
    assert rep.p_fp_hat == 1.0
    assert rep.p_fn_hat == 0.0


def test_attack_flags_lower_the_fn_exponent():
    # corruption plus distortion should make H1 strictly easier to pass off
    px, py = Pmf([0.8, 0.2]), Pmf([0.25, 0.75])
    clean = run_game_trials(px, py, cfg(lam=0.08), COST2, 120, 3000, 21)
    attacked = run_game_trials(px, py, cfg(lam=0.08, alpha=0.2, L=0.25),
                               COST2, 120, 3000, 21)
    assert attacked.p_fn_hat > clean.p_fn_hat


def test_zero_m2_warning():
    a = cfg(alpha=0.01)
    rep = run_game_trials(Pmf([0.6, 0.4]), Pmf([0.4, 0.6]), a, COST2,
                          10, 50, 4)
    assert rep.warning is not None and "zero corrupted samples" in rep.warning
    rep2 = run_game_trials(Pmf([0.6, 0.4]), Pmf([0.4, 0.6]), cfg(alpha=0.2),
                           COST2, 10, 50, 4)
    assert rep2.warning is None


def test_validation_errors():
    px, py = Pmf([0.6, 0.4]), Pmf([0.4, 0.6])
    with pytest.raises(ValueError):
        run_game_trials(px, py, cfg(), COST2, 0, 10, 1)
    with pytest.raises(ValueError):
        run_game_trials(px, py, cfg(), COST2, 10, 0, 1)
    with pytest.raises(ValueError):
        run_game_trials(px, py, cfg(), COST2, 10, 10, -1)
    with pytest.raises(ValueError):
        run_game_trials(px, Pmf([0.2, 0.3, 0.5]), cfg(), COST2, 10, 10, 1)
    with pytest.raises(ValueError, match="training samples"):
        run_game_trials(px, py, cfg(c=0.01), COST2, 10, 10, 1)


# ---------------------------------------------------------------------------
# report serialization


def test_report_json_roundtrip():
    rep = run_game_trials(Pmf([0.7, 0.3]), Pmf([0.3, 0.7]),
                          cfg(alpha=0.1, lam=0.1), COST2, 30, 100, 8)
    back = SimulationReport.from_json(rep.to_json())
    assert back == rep


def test_report_infinity_encoding():
    rep = run_game_trials(Pmf([1.0, 0.0]), Pmf([0.0, 1.0]), cfg(), COST2,
                          50, 100, 1)
    d = json.loads(rep.to_json())
    assert d["fp_exponent_hat"] is None and d["fn_exponent_hat"] is None
    assert math.isinf(SimulationReport.from_json(rep.to_json()).fn_exponent_hat)
    row = rep.to_csv_row()
    assert row.split(",")[4] == "inf"
    assert sim.CSV_HEADER.count(",") == row.count(",")


def test_report_validates_probabilities():
    good = run_game_trials(Pmf([0.6, 0.4]), Pmf([0.4, 0.6]), cfg(), COST2,
                           10, 10, 1)
    with pytest.raises(ValueError):
        SimulationReport(n=10, trials=10, p_fp_hat=1.5, p_fn_hat=0.0,
                         fp_exponent_hat=0.0, fn_exponent_hat=0.0, seed=1,
                         config_echo=good.config_echo)


def test_exponent_estimate_censoring():
    assert math.isinf(sim._exponent_estimate(0, 100, 50))
    assert sim._exponent_estimate(100, 100, 50) == 0.0
    assert repr(sim._exponent_estimate(100, 100, 50)) == "0.0"  # not -0.0
    assert sim._exponent_estimate(25, 100, 10) == pytest.approx(0.2)


# ---------------------------------------------------------------------------
# sweeps


def test_exponent_sweep_shares_seed_and_orders_n():
    px, py = Pmf([0.8, 0.2]), Pmf([0.3, 0.7])
    reps = exponent_sweep(px, py, cfg(lam=0.02), COST2, [50, 100, 200],
                          300, 6)
    assert [r.n for r in reps] == [50, 100, 200]
    assert all(r.seed == 6 for r in reps)
    single = run_game_trials(px, py, cfg(lam=0.02), COST2, 100, 300, 6)
    assert reps[1] == single
    with pytest.raises(ValueError):
        exponent_sweep(px, py, cfg(), COST2, [100, 100], 10, 1)
    with pytest.raises(ValueError):
        exponent_sweep(px, py, cfg(), COST2, [200, 100], 10, 1)


def test_fn_exponent_estimates_track_theory():
    # clean game: the false-negative exponent at lambda -> 0 approaches
    # D(P_X || P_Y); at n large the estimate should sit near the true decay
    px, py = Pmf([0.65, 0.35]), Pmf([0.35, 0.65])
    reps = exponent_sweep(px, py, cfg(lam=0.005), COST2, [40, 80, 160],
                          20000, 13)
    finite = [r.fn_exponent_hat for r in reps if not math.isinf(r.fn_exponent_hat)]
    assert len(finite) >= 2
    # decay rate bounded by the uncorrupted divergence; estimates noisy but
    # must stay the right order of magnitude rather than drift to zero
    ref = kl_divergence(px, py)
    for est in finite:
        assert 0.2 * ref <= est <= 2.5 * ref


# ---------------------------------------------------------------------------
# large-deviation probe and set distances


def test_sanov_probe_halfspace():
    pred = lambda q: q.probs[1] >= 0.35
    out = sanov_probe(Pmf([0.7, 0.3]), pred, [50, 200], 4000, 17)
    assert [n for n, _, _ in out] == [50, 200]
    bounds = {b for _, _, b in out}
    assert len(bounds) == 1
    # the minimizing type sits on the halfspace boundary
    want = kl_divergence(Pmf([0.65, 0.35]), Pmf([0.7, 0.3]))
    assert bounds.pop() == pytest.approx(want, abs=5e-5)
    # probability upper bound 2^{-n(bound - K log2(n+1)/n)} holds in sample
    for n, emp, bound in out:
        if not math.isinf(emp):
            assert emp >= bound - 2 * math.log2(n + 1.0) / n


def test_sanov_probe_set_containing_p():
    out = sanov_probe(Pmf([0.7, 0.3]), lambda q: q.probs[0] >= 0.5,
                      [100], 2000, 17)
    n, emp, bound = out[0]
    assert bound == pytest.approx(0.0, abs=1e-9)
    assert emp == pytest.approx(0.0, abs=0.01)  # nearly every type qualifies


def test_hausdorff_examples():
    a = [Pmf([0.5, 0.5])]
    b = [Pmf([0.7, 0.3])]
    assert hausdorff_distance(a, b) == pytest.approx(0.4, abs=1e-12)
    assert hausdorff_distance(a, a) == 0.0
    two = [Pmf([0.5, 0.5]), Pmf([0.9, 0.1])]
    assert hausdorff_distance(two, a) == pytest.approx(0.8, abs=1e-12)
    with pytest.raises(ValueError):
        hausdorff_distance([], a)


def test_type_lattice_converges_to_ball():
    # n-types inside an l1 ball approach the continuum ball in hausdorff
    # distance at rate ~1/n
    lo, hi = 0.35, 0.65
    dense = [Pmf([x, 1 - x]) for x in np.linspace(lo, hi, 2001)]
    dists = []
    for n in (20, 80, 320):
        lattice = [Pmf([i / n, 1 - i / n]) for i in range(n + 1)
                   if lo <= i / n <= hi]
        dists.append(hausdorff_distance(lattice, dense))
    assert dists[0] >= dists[1] >= dists[2]
    assert dists[2] <= 2.0 / 320 + 1e-3
