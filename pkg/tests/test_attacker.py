import numpy as np
import pytest

import oracles as orc
from conftest import random_pmf
from poisonid.attacker import (AttackResult, _attack_nontargeted,
                               _closest_transport_l1, attack_nontargeted_addition,
                               attack_targeted_addition,
                               attack_targeted_replacement, attack_test)
from poisonid.config import GameConfig, Variant
from poisonid.defender import statistic
from poisonid.pmf import Pmf, l1_distance
from poisonid.transport import (CostMatrix, col_marginal, is_admissible,
                                row_marginal)

COST2 = CostMatrix.absolute(2)
COST3 = CostMatrix.absolute(3)


def cfg(k=2, **kw) -> GameConfig:
    base = dict(alpha=0.0, lam=0.1, c=1.0, L=0.0,
                variant=Variant.ADDITION, alphabet_size=k)
    base.update(kw)
    return GameConfig(**base)


# ---------------------------------------------------------------------------
# frozen values


def test_attack_test_frozen_binary():
    res = attack_test(Pmf([0.9, 0.1]), Pmf([0.5, 0.5]), cfg(L=0.2), COST2)
    assert res.achieved_statistic == pytest.approx(0.060610289678644805, abs=1e-10)
    assert res.fake_training is None
    # moving the full budget toward the training type is optimal here
    assert res.attacked_pmf.probs[0] == pytest.approx(0.7, abs=1e-9)


def test_attack_targeted_addition_frozen():
    res = attack_targeted_addition(Pmf([0.35, 0.65]), Pmf([0.85, 0.15]),
                                   cfg(alpha=0.2, L=0.1), COST2)
    assert res.achieved_statistic == pytest.approx(0.03325682372937887, abs=1e-9)
    grid = orc.grid_attack_targeted_k2(
        np.array([0.35, 0.65]), np.array([0.85, 0.15]), 0.2, 1.0, 0.1, 1.0,
        "addition", zsteps=400, tsteps=400, wsteps=200)
    assert res.achieved_statistic == pytest.approx(grid, abs=2e-5)


def test_attack_targeted_replacement_frozen():
    res = attack_targeted_replacement(Pmf([0.35, 0.65]), Pmf([0.85, 0.15]),
                                      cfg(alpha=0.1, L=0.15,
                                          variant="replacement"), COST2)
    assert res.achieved_statistic == pytest.approx(0.034802652631428996, abs=1e-9)
    grid = orc.grid_attack_targeted_k2(
        np.array([0.35, 0.65]), np.array([0.85, 0.15]), 0.1, 1.0, 0.15, 1.0,
        "replacement", zsteps=400, tsteps=400, wsteps=200)
    assert res.achieved_statistic == pytest.approx(grid, abs=2e-5)


def test_attack_test_frozen_k3():
    res = attack_test(Pmf([0.6, 0.25, 0.15]), Pmf([0.2, 0.35, 0.45]),
                      cfg(k=3, alpha=0.1, L=0.25), COST3)
    assert res.achieved_statistic == pytest.approx(0.0754145101651434, abs=1e-7)
    # a coarse product-grid scan can only sit above the joint minimum
    grid = orc.grid_attack_test_k3(
        np.array([0.6, 0.25, 0.15]), np.array([0.2, 0.35, 0.45]),
        0.1, 1.0, 0.25, COST3.d, "addition")
    assert res.achieved_statistic <= grid + 1e-9
    assert grid - res.achieved_statistic <= 1e-2


def test_attack_test_matches_grid_binary(rng):
    for variant in ("addition", "replacement"):
        for _ in range(6):
            py = random_pmf(rng, 2, floor=0.05)
            pt = random_pmf(rng, 2, floor=0.05)
            alpha = float(rng.uniform(0.0, 0.3))
            L = float(rng.uniform(0.0, 0.4))
            res = attack_test(Pmf(py), Pmf(pt),
                              cfg(alpha=alpha, L=L, variant=variant), COST2)
            grid = orc.grid_attack_test_k2(py, pt, alpha, 1.0, L, 1.0, variant)
            assert res.achieved_statistic == pytest.approx(grid, abs=1e-6)


# ---------------------------------------------------------------------------
# structure


def test_zero_budget_keeps_test_type():
    py, pt = Pmf([0.8, 0.2]), Pmf([0.4, 0.6])
    res = attack_test(py, pt, cfg(alpha=0.1, L=0.0), COST2)
    assert l1_distance(res.attacked_pmf, py) < 1e-12
    base, _ = statistic(py, pt, 0.1, 1.0, "addition")
    assert res.achieved_statistic == pytest.approx(base, abs=1e-12)


def test_attack_never_hurts(rng):
    for variant in ("addition", "replacement"):
        for _ in range(8):
            py = Pmf(random_pmf(rng, 2, floor=0.03))
            pt = Pmf(random_pmf(rng, 2, floor=0.03))
            alpha = float(rng.uniform(0.0, 0.3))
            L = float(rng.uniform(0.0, 0.5))
            res = attack_test(py, pt, cfg(alpha=alpha, L=L,
                                          variant=variant), COST2)
            base, _ = statistic(py, pt, alpha, 1.0, variant)
            assert res.achieved_statistic <= base + 1e-8
        # one larger-alphabet spot check per variant
        res = attack_test(Pmf([0.55, 0.3, 0.15]), Pmf([0.2, 0.3, 0.5]),
                          cfg(k=3, alpha=0.1, L=0.2, variant=variant), COST3)
        base, _ = statistic(Pmf([0.55, 0.3, 0.15]), Pmf([0.2, 0.3, 0.5]),
                            0.1, 1.0, variant)
        assert res.achieved_statistic <= base + 1e-8


def test_achieved_consistent_with_defender(rng):
    # the reported statistic is exactly what the defender would compute on
    # the attacked test type and the corrupted training pmf
    for _ in range(5):
        ptau = Pmf(random_pmf(rng, 2, floor=0.05))
        py = Pmf(random_pmf(rng, 2, floor=0.05))
        a = cfg(alpha=0.15, L=0.2)
        res = attack_targeted_addition(ptau, py, a, COST2)
        corrupted = Pmf(0.85 * ptau.probs + 0.15 * res.fake_training.probs)
        want, _ = statistic(res.attacked_pmf, corrupted, 0.15, 1.0, "addition")
        assert res.achieved_statistic == pytest.approx(want, abs=1e-12)

        r = cfg(alpha=0.15, L=0.2, variant="replacement")
        res2 = attack_targeted_replacement(ptau, py, r, COST2)
        assert l1_distance(res2.fake_training, ptau) <= 2 * 0.15 + 1e-9
        want2, _ = statistic(res2.attacked_pmf, res2.fake_training, 0.15, 1.0,
                             "replacement")
        assert res2.achieved_statistic == pytest.approx(want2, abs=1e-12)


def test_transport_always_admissible(rng):
    for i in range(8):
        k = 3 if i < 2 else 2
        cost = COST3 if k == 3 else COST2
        py = Pmf(random_pmf(rng, k, floor=0.02))
        ptau = Pmf(random_pmf(rng, k, floor=0.02))
        L = float(rng.uniform(0.0, 0.4))
        res = attack_targeted_addition(ptau, py, cfg(k=k, alpha=0.1, L=L), cost)
        assert is_admissible(res.transport, py, L + 1e-8, cost)
        assert l1_distance(col_marginal(res.transport), res.attacked_pmf) < 1e-9
        assert l1_distance(row_marginal(res.transport), py) < 1e-9


def test_monotone_in_budget(rng):
    py, pt = Pmf([0.85, 0.15]), Pmf([0.3, 0.7])
    prev = np.inf
    for L in (0.0, 0.1, 0.2, 0.4, 0.8):
        res = attack_test(py, pt, cfg(alpha=0.05, L=L), COST2)
        assert res.achieved_statistic <= prev + 1e-10
        prev = res.achieved_statistic
    assert prev == pytest.approx(0.0, abs=1e-10)  # budget covers the gap


def test_monotone_in_alpha():
    ptau, py = Pmf([0.3, 0.7]), Pmf([0.75, 0.25])
    for variant in ("addition", "replacement"):
        prev = np.inf
        for a in (0.0, 0.05, 0.1, 0.2, 0.3):
            res = (attack_targeted_addition if variant == "addition"
                   else attack_targeted_replacement)(
                ptau, py, cfg(alpha=a, L=0.05, variant=variant), COST2)
            assert res.achieved_statistic <= prev + 1e-9
            prev = res.achieved_statistic


def test_blinding_threshold_binary():
    # l1 gap 0.8: addition blinds at 0.8/2.8, replacement at 0.2
    ptau, py = Pmf([0.3, 0.7]), Pmf([0.7, 0.3])
    below = attack_targeted_addition(ptau, py, cfg(alpha=0.25, L=0.0), COST2)
    assert below.achieved_statistic > 1e-4
    above = attack_targeted_addition(ptau, py, cfg(alpha=0.3, L=0.0), COST2)
    assert above.achieved_statistic == pytest.approx(0.0, abs=1e-9)

    below_r = attack_targeted_replacement(
        ptau, py, cfg(alpha=0.15, L=0.0, variant="replacement"), COST2)
    assert below_r.achieved_statistic > 1e-4
    above_r = attack_targeted_replacement(
        ptau, py, cfg(alpha=0.25, L=0.0, variant="replacement"), COST2)
    assert above_r.achieved_statistic == pytest.approx(0.0, abs=1e-9)


def test_targeted_alpha_zero_matches_test_only():
    ptau, py = Pmf([0.25, 0.75]), Pmf([0.7, 0.3])
    t = attack_test(py, ptau, cfg(alpha=0.0, L=0.15), COST2)
    g = attack_targeted_addition(ptau, py, cfg(alpha=0.0, L=0.15), COST2)
    assert g.achieved_statistic == pytest.approx(t.achieved_statistic, abs=1e-9)


# ---------------------------------------------------------------------------
# non-targeted two-step attack


def test_nontargeted_at_model_matches_targeted():
    ptau, py = Pmf([0.3, 0.7]), Pmf([0.8, 0.2])
    a = cfg(alpha=0.15, L=0.2)
    targ = attack_targeted_addition(ptau, py, a, COST2)
    nont = attack_nontargeted_addition(ptau, py, py, a, COST2)
    assert nont.achieved_statistic == pytest.approx(
        targ.achieved_statistic, abs=1e-6)
    assert l1_distance(nont.attacked_pmf, targ.attacked_pmf) < 1e-4


def test_nontargeted_converges_to_targeted():
    ptau, py = Pmf([0.3, 0.7]), Pmf([0.8, 0.2])
    a = cfg(alpha=0.1, L=0.25)
    targ = attack_targeted_addition(ptau, py, a, COST2).achieved_statistic
    gaps = []
    for eps in (0.2, 0.1, 0.05, 0.01):
        obs = Pmf([0.8 - eps, 0.2 + eps])
        res = attack_nontargeted_addition(ptau, py, obs, a, COST2)
        gaps.append(abs(res.achieved_statistic - targ))
    assert gaps[-1] < 5e-3
    assert gaps[-1] <= gaps[0] + 1e-12


def test_nontargeted_replacement_variant():
    ptau, py = Pmf([0.3, 0.7]), Pmf([0.8, 0.2])
    a = cfg(alpha=0.1, L=0.2, variant="replacement")
    targ = attack_targeted_replacement(ptau, py, a, COST2)
    nont = _attack_nontargeted(ptau, py, py, a, COST2)
    assert nont.achieved_statistic == pytest.approx(
        targ.achieved_statistic, abs=1e-6)
    assert l1_distance(nont.fake_training, ptau) <= 2 * 0.1 + 1e-9


def test_step2_transport_is_l1_optimal(rng):
    # the second stage lands as close to its target as the budget permits
    for _ in range(8):
        obs = random_pmf(rng, 2, floor=0.02)
        target = random_pmf(rng, 2, floor=0.02)
        L = float(rng.uniform(0.0, 0.5))
        plan = _closest_transport_l1(Pmf(obs), target, L, COST2)
        got = l1_distance(col_marginal(plan), Pmf(target))
        want = orc.grid_min_l1_within_emd_k2(obs, target, L, 1.0)
        # the lattice scan can only overestimate the minimum (by at most its
        # own spacing); exact-zero optima in particular fall between points
        assert got <= want + 1e-9
        assert want - got <= 5e-4
        assert is_admissible(plan, Pmf(obs), L + 1e-12, COST2)


def test_step2_k3_matches_grid(rng):
    for _ in range(4):
        obs = random_pmf(rng, 3, floor=0.05)
        target = random_pmf(rng, 3, floor=0.05)
        L = float(rng.uniform(0.05, 0.4))
        plan = _closest_transport_l1(Pmf(obs), target, L, COST3)
        got = l1_distance(col_marginal(plan), Pmf(target))
        want = orc.grid_min_l1_within_emd_k3(obs, target, L)
        assert got <= want + 1e-9  # grid scan only overestimates the minimum
        assert want - got <= 2e-2
        assert is_admissible(plan, Pmf(obs), L + 1e-9, COST3)
