import itertools
import random
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nilorbit.diophantine import (DioWitness, bracket_witness, convergent_denominators, kronecker_witness,
                                  recurrence_witness, vdc_correlations, verify_kronecker, weyl_sum, weyl_witness)
from nilorbit.polyseq import TorusPoly
from oracles import brute_kronecker, norm_rz, vdc_sides, weyl_sum_mp


def test_convergents():
    assert convergent_denominators(F(355, 113), 200) == [1, 7, 113]


def test_known_witnesses():
    assert kronecker_witness(F(3, 7), 10, 10).k == (7,)
    w = kronecker_witness(mpmath.phi, 10, 20)
    assert w.k == (13,)
    assert kronecker_witness((F(1, 2), F(1, 3)), 10, 3).k == (2, 0)


@settings(max_examples=80)
@given(st.fractions(min_value=0, max_value=1, max_denominator=10 ** 9))
def test_one_dimensional_witness_is_optimal(alpha):
    w = kronecker_witness(alpha, 1, 100)
    k, v = brute_kronecker(alpha, 100)
    assert w.achieved == v
    assert w.k == (k,)
    assert verify_kronecker(w, alpha)


def test_one_dimensional_witness_for_reals():
    rng = random.Random(5)
    for _ in range(30):
        alpha = mpmath.mpf(rng.random()) + mpmath.sqrt(rng.randint(2, 50))
        w = kronecker_witness(alpha, 1, 100)
        best = min(norm_rz(k * alpha) for k in range(1, 101))
        assert abs(w.achieved - best) < 1e-30


def test_box_search_matches_brute_force():
    rng = random.Random(11)
    for _ in range(10):
        alpha = tuple(F(rng.randint(0, 10 ** 6), 10 ** 6 + rng.randint(1, 99)) for _ in range(2))
        w = kronecker_witness(alpha, 1, 6)
        best = min(norm_rz(k1 * alpha[0] + k2 * alpha[1])
                   for k1, k2 in itertools.product(range(-6, 7), repeat=2) if (k1, k2) != (0, 0))
        assert w.achieved == best
        assert next(a for a in w.k if a) > 0


def test_target_filter():
    alpha = F(1, 3) + F(1, 10 ** 6)
    assert kronecker_witness(alpha, 1000, 5, target=F(1, 100)).k == (3,)
    assert kronecker_witness(F(1, 2) + F(1, 9), 1000, 5, target=1) is None


def test_witness_validation():
    with pytest.raises(ValueError):
        DioWitness((0,), 0, 5)
    with pytest.raises(ValueError):
        DioWitness((9,), 0, 5)


@pytest.mark.parametrize("coeffs", [
    {(1,): F(1, 7)},
    {(1,): F(1, 3), (2,): F(2, 11)},
    {(1,): mpmath.sqrt(2), (3,): mpmath.sqrt(3) / 10},
])
def test_weyl_sum_matches_direct_sum(coeffs):
    p = TorusPoly(1, coeffs)
    direct = weyl_sum_mp({j[0]: a for j, a in p.coeffs.items()}, 500)
    assert abs(weyl_sum(p, 500) - direct) < 1e-12


def test_weyl_sum_rational_period():
    assert abs(weyl_sum(TorusPoly(1, {(1,): F(1, 5)}), 10)) < 1e-15
    assert abs(weyl_sum(TorusPoly(1, {(1,): F(0)}), 10) - 1) < 1e-15


@settings(max_examples=40)
@given(st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_geometric_sum_bound(alpha):
    N = 2000
    s = abs(weyl_sum(TorusPoly(1, {(1,): mpmath.mpf(alpha)}), N))
    assert s <= min(1, 1 / (2 * N * norm_rz(alpha))) + 1e-9


def test_vdc_matches_direct_sums():
    rng = np.random.default_rng(0)
    a = np.exp(2j * np.pi * rng.random(300))
    rep = vdc_correlations(a, 20)
    lhs, rhs = vdc_sides(list(a), 20)
    assert abs(rep.lhs - lhs) < 1e-12 and abs(rep.rhs - rhs) < 1e-12
    assert rep.holds


def test_vdc_rejects_large_entries():
    with pytest.raises(ValueError):
        vdc_correlations(np.array([2.0, 0.0]), 1)


def test_vdc_structured_sequence():
    n = np.arange(1, 1001)
    a = np.exp(2j * np.pi * (n * n * 0.001))
    rep = vdc_correlations(a, 100)
    assert rep.holds and rep.lhs <= rep.rhs


def test_weyl_witness_scan():
    p = TorusPoly(1, {(1,): F(1, 3) + F(1, 10 ** 7), (2,): F(2, 3)})
    w = weyl_witness(p, 1000, 10)
    assert w.k == (3,)
    assert w.achieved == 3 * F(1, 10 ** 7) * 1000
    assert weyl_witness(p, 1000, 10, target=F(1, 10 ** 6)) is None


def test_recurrence_heavy_hits_find_witness():
    p = TorusPoly(1, {(1,): F(1, 10 ** 6)})
    r = recurrence_witness(p, 1000, (0.0, 0.01), 0.5)
    assert r.hits >= 500 and not r.fallback
    assert r.witness is not None and r.witness.k == (1,)
    assert r.witness.achieved <= r.threshold


def test_recurrence_equidistributed_has_few_hits():
    p = TorusPoly(1, {(1,): mpmath.sqrt(2)})
    r = recurrence_witness(p, 10000, (0.0, 0.01), 0.5)
    assert abs(r.hits - 100) < 20
    assert r.witness is None


def test_recurrence_wide_interval_falls_back():
    r = recurrence_witness(TorusPoly(1, {(1,): F(1, 3)}), 100, (0.0, 0.4), 0.5, K=5)
    assert r.fallback and r.witness.k == (3,)


def test_bracket_small_zeta():
    v = bracket_witness(0, 0, [1e-6], [mpmath.sqrt(2)], 1000, 0.5)
    assert v.kind == "small_zeta" and v.hypothesis
    assert v.bound == pytest.approx(1e-3)


def test_bracket_structured_gamma():
    # ζ{γh} with γ close to 1/4 only takes few values: a witness for γ exists
    gamma = F(1, 4) + F(1, 10 ** 7)
    v = bracket_witness(0, 0, [1.0], [gamma], 1000, 0.2)
    assert v.kind == "gamma_witness"
    assert v.witness is not None and v.witness.k == (4,)
