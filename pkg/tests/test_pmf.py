import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as orc
from poisonid.pmf import (EmpiricalType, Pmf, delta_n, empirical_type, h_c,
                          kl_divergence, l1_distance)
from poisonid.config import GameConfig


def probs(k=2, floor=0.0):
    """Strategy: a random pmf over k symbols as a list of floats."""
    return st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k).map(
        lambda v: [x / sum(v) for x in v])


# ---------------------------------------------------------------------------
# Pmf construction


def test_pmf_basic():
    p = Pmf([0.3, 0.7])
    assert p.k == 2
    assert p[1] == 0.7
    assert list(p) == [0.3, 0.7]


def test_pmf_rejects_negative():
    with pytest.raises(ValueError):
        Pmf([-0.1, 1.1])


def test_pmf_rejects_bad_mass():
    with pytest.raises(ValueError):
        Pmf([0.3, 0.3])


def test_pmf_renormalizes_tiny_drift():
    p = Pmf([0.3 + 2e-10, 0.7])
    assert abs(sum(p.probs) - 1.0) < 1e-15


def test_pmf_immutable():
    p = Pmf([0.5, 0.5])
    with pytest.raises(AttributeError):
        p.probs = np.array([1.0, 0.0])
    with pytest.raises(ValueError):
        p.probs[0] = 0.9


def test_pmf_json_roundtrip():
    p = Pmf([0.2, 0.3, 0.5])
    assert Pmf.from_json(p.to_json()) == p


def test_bernoulli_index_convention():
    # bern(p) puts probability p on symbol 1.
    b = Pmf.bernoulli(0.7)
    assert b.k == 2
    assert b.probs[1] == 0.7
    assert b.probs[0] == pytest.approx(0.3, abs=1e-15)
    assert Pmf.bernoulli(0.25) == Pmf([0.75, 0.25])


# ---------------------------------------------------------------------------
# empirical types


def test_empirical_type_point_mass():
    t = empirical_type([0, 0, 0, 0], 2)
    assert t.counts.tolist() == [4, 0] and t.n == 4


def test_empirical_type_counts():
    t = empirical_type([0, 1, 1, 2], 3)
    assert t.counts.tolist() == [1, 2, 1] and t.n == 4


def test_empirical_type_rejects_out_of_alphabet():
    with pytest.raises(ValueError):
        empirical_type([0, 3], 3)
    with pytest.raises(ValueError):
        empirical_type([], 2)


def test_empirical_type_permutation_invariant(rng):
    seq = rng.integers(0, 4, size=200)
    perm = rng.permutation(seq)
    assert empirical_type(seq, 4) == empirical_type(perm, 4)


def test_type_concatenation_mixes_exactly():
    # counts add, so the concatenated type is the count-weighted mixture
    x = empirical_type([0, 0, 1], 2)
    t = empirical_type([1, 1, 1, 0], 2)
    both = empirical_type([0, 0, 1, 1, 1, 1, 0], 2)
    assert (both.counts == x.counts + t.counts).all()
    assert both.n == x.n + t.n


def test_fair_coin_type_concentrates(rng):
    """L1 deviation above 0.1 at n=1000 is a < 0.2% event; with 10^4 draws
    seeing more than 60 of them would be a > 12-sigma fluctuation."""
    p_dev = orc.binom_prob_abs_dev_gt(1000, 0.5, 0.05)
    assert p_dev == pytest.approx(0.0015611388396988611, rel=1e-9)
    bad = 0
    for _ in range(10_000):
        c0 = rng.binomial(1000, 0.5)
        if abs(c0 / 1000 - 0.5) * 2 > 0.1:
            bad += 1
    assert bad < 60


def test_empirical_type_json_roundtrip():
    t = EmpiricalType([3, 4, 5], 12)
    assert EmpiricalType.from_json(t.to_json()) == t


# ---------------------------------------------------------------------------
# divergences


def test_kl_identity_zero():
    p = Pmf([0.3, 0.7])
    assert kl_divergence(p, p) == 0.0


def test_kl_frozen_value():
    got = kl_divergence(Pmf([0.5, 0.5]), Pmf([0.25, 0.75]))
    assert got == pytest.approx(0.20751874963942185, abs=1e-12)


def test_kl_single_term_is_one_bit():
    assert kl_divergence(Pmf([1.0, 0.0]), Pmf([0.5, 0.5])) == 1.0


def test_kl_infinite_off_support():
    assert kl_divergence(Pmf([0.5, 0.5]), Pmf([1.0, 0.0])) == math.inf


def test_kl_dimension_mismatch():
    with pytest.raises(ValueError):
        kl_divergence(Pmf([1.0]), Pmf([0.5, 0.5]))


@given(probs(3), probs(3))
def test_kl_gibbs(p, q):
    d = kl_divergence(Pmf(p), Pmf(q))
    assert d >= 0.0
    if l1_distance(Pmf(p), Pmf(q)) < 1e-12:
        assert d < 1e-10


def test_l1_examples():
    assert l1_distance(Pmf([0.3, 0.7]), Pmf([0.7, 0.3])) == pytest.approx(0.8)
    assert l1_distance(Pmf([1, 0, 0]), Pmf([0, 0.5, 0.5])) == 2.0
    p = Pmf([0.2, 0.8])
    assert l1_distance(p, p) == 0.0


@given(probs(4), probs(4))
def test_l1_range_and_symmetry(p, q):
    d = l1_distance(Pmf(p), Pmf(q))
    assert 0.0 <= d <= 2.0
    assert d == l1_distance(Pmf(q), Pmf(p))


# ---------------------------------------------------------------------------
# h_c


def test_h_c_zero_on_diagonal():
    for c in (0.3, 1.0, 2.5):
        assert h_c(Pmf([0.2, 0.8]), Pmf([0.2, 0.8]), c) == pytest.approx(0.0, abs=1e-14)


def test_h_c_frozen_value_and_mixture_identity():
    p, pp = Pmf([0.5, 0.5]), Pmf([0.25, 0.75])
    got = h_c(p, pp, 1.0)
    assert got == pytest.approx(0.097589881390797, abs=1e-12)
    u = Pmf([0.375, 0.625])
    indep = kl_divergence(p, u) + kl_divergence(pp, u)
    assert got == pytest.approx(indep, abs=1e-10)


@given(probs(2), probs(2), st.floats(0.2, 3.0))
def test_h_c_matches_independent_recomputation(p, pp, c):
    u = [(p[i] + c * pp[i]) / (1 + c) for i in range(2)]
    want = orc.kl_bits(p, u) + c * orc.kl_bits(pp, u)
    assert h_c(Pmf(p), Pmf(pp), c) == pytest.approx(want, abs=1e-10)


@given(probs(3), probs(3), probs(3), probs(3), st.floats(0.0, 1.0),
       st.floats(0.25, 2.0))
def test_h_c_jointly_convex(p1, pp1, p2, pp2, t, c):
    mix_p = Pmf([t * a + (1 - t) * b for a, b in zip(p1, p2)])
    mix_pp = Pmf([t * a + (1 - t) * b for a, b in zip(pp1, pp2)])
    lhs = h_c(mix_p, mix_pp, c)
    rhs = t * h_c(Pmf(p1), Pmf(pp1), c) + (1 - t) * h_c(Pmf(p2), Pmf(pp2), c)
    assert lhs <= rhs + 1e-10


def test_h_matches_worst_case_joint_type_probability():
    """2^{-n h} tracks max_P P(type class v) * P(type class t): the h value
    must match the grid maximum up to the polynomial (log n)/n slack."""
    cv = np.array([13, 7])
    ct = np.array([6, 14])
    n = 20
    best = orc.type_class_joint_max_log2(cv, ct)
    h = h_c(Pmf(cv / n), Pmf(ct / n), 1.0)
    slack = 4 * math.log2(n + 1) / n
    assert -best / n == pytest.approx(h, abs=slack)


# ---------------------------------------------------------------------------
# delta_n


def _cfg(alpha=0.0, c=1.0, k=2):
    return GameConfig(alpha=alpha, lam=0.1, c=c, L=0.0, variant="addition",
                      alphabet_size=k)


def test_delta_n_frozen_value():
    assert delta_n(10, _cfg()) == pytest.approx(2 * math.log2(11 * 11) / 10,
                                                abs=1e-12)


def test_delta_n_vanishes():
    prev = None
    for n in (100, 1000, 10_000, 100_000, 1_000_000):
        d = delta_n(n, _cfg())
        if prev is not None:
            assert d < prev
        prev = d
    assert prev < 1e-4


def test_delta_n_linear_in_k():
    d2 = delta_n(500, _cfg(k=2))
    d6 = delta_n(500, _cfg(k=6))
    assert d6 == pytest.approx(3 * d2, rel=1e-12)
