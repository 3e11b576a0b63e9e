import random
from fractions import Fraction as F

import mpmath
import pytest

from nilorbit.factorize import (RationalizationOverflow, factorize_full, filtration_property_holds, kernel_group,
                                kernel_subgroup, period_of_rational_sequence, progression_decomposition,
                                relative_square, split_sequence, split_square_character, vdc_square_sequence,
                                _lift_to)
from nilorbit.lie_core import group_multiply, heisenberg, torus
from nilorbit.nilmanifold import HorizontalCharacter
from nilorbit.polyseq import PolySeq, compose_character, linear_sequence, polynomial_membership_test

H = heisenberg()


def skew(alpha):
    return linear_sequence(H.element((2 * alpha, 1, -alpha)))


def test_kernels():
    assert kernel_subgroup(HorizontalCharacter(H, (1, 0, 0))).dimension == 2
    K = kernel_group(HorizontalCharacter(H, (2, -3, 0)))
    assert K.m == 2 and K.parent == H
    assert kernel_group(HorizontalCharacter(torus(1), (1,))).m == 0


def test_split_reconstructs_and_kills_character():
    g = PolySeq(H, 1, {(0,): (F(1, 3), F(5, 2), 0), (1,): (mpmath.sqrt(2), F(1, 3) + F(1, 10 ** 9), F(2, 5)),
                       (2,): (0, 0, mpmath.sqrt(3))})
    eta = HorizontalCharacter(H, (0, 3, 0))
    s = split_sequence(g, eta, M=100)
    for n in range(-5, 20):
        rec = group_multiply(group_multiply(s.epsilon((n,)), s.g_prime((n,))), s.gamma((n,)))
        assert max(abs(a - b) for a, b in zip(rec.psi, g.psi((n,)))) < 1e-25
    assert compose_character(eta, s.g_prime).coeffs == {}
    assert s.gamma.exact


def test_split_overflow():
    g = PolySeq(torus(3), 1, {(1,): (mpmath.sqrt(2), F(1, 7), F(1, 9))})
    with pytest.raises(RationalizationOverflow):
        split_sequence(g, HorizontalCharacter(torus(3), (1, 1, 1)), M=10)


def _brute_period(gamma, Q):
    G = gamma.group
    for q in range(1, Q + 1):
        if all(G.is_lattice(group_multiply(G.invert(gamma((n,))), gamma((n + q,)))) for n in range(-30, 30)):
            return q
    return None


@pytest.mark.parametrize("coeffs", [
    {(1,): (F(1, 3), F(1, 2), 0)},
    {(1,): (F(1, 3), F(1, 2), F(1, 5)), (2,): (0, 0, F(1, 7))},
    {(1,): (2, F(3, 4), 0), (2,): (0, 0, F(1, 2))},
])
def test_period_matches_brute_force(coeffs):
    gamma = PolySeq(H, 1, coeffs)
    cert = period_of_rational_sequence(gamma, 500)
    assert cert.q == _brute_period(gamma, 500)


def test_factorize_equidistributed_is_trivial():
    g = PolySeq(H, 1, {(1,): (mpmath.sqrt(2), mpmath.sqrt(3), 0), (2,): (0, 0, mpmath.sqrt(5))})
    r = factorize_full(g, 2000, 4, 1)
    assert r.iterations == 0
    assert r.subgroup == H
    assert r.gamma.is_identity()


def test_factorize_rational_sequence():
    g = PolySeq(H, 1, {(1,): (F(1, 3), F(1, 2), 0), (2,): (0, 0, F(1, 5))})
    r = factorize_full(g, 1000, 4, 1)
    for n in range(100):
        assert r.reconstruct((n,)) == g((n,))
    assert r.period is not None and r.period.q <= r.M
    assert r.smoothness.ok


def test_factorize_skew_torus():
    N = 10 ** 4
    alpha = F(1, 10 ** 6)
    r = factorize_full(skew(alpha), N, 4, 1)
    assert [s.eta.k for s in r.steps][:1] == [(0, 1, 0)]
    for n in range(0, N, 97):
        assert r.reconstruct((n,)) == skew(alpha)((n,))
    assert r.smoothness.ok
    assert r.smoothness.max_increment <= F(r.M, N)
    # the 2nα drift goes to ε and what is left is the central -n²α part
    drift = [s.certificate.value for s in r.steps if s.certificate.value]
    assert drift and all(2 * N * alpha / 4 <= v <= 4 * 2 * N * alpha for v in drift)
    assert r.subgroup_basis == [(0, 0, 1)]
    assert r.epsilon.coeffs == {(1,): (2 * alpha, 0, 0)}
    assert r.g_prime.coeffs == {(1,): (-alpha,), (2,): (-2 * alpha,)}
    for n in (1, 17, 999):
        assert r.g_prime((n,)).psi == (-n * n * alpha,)
    for s in r.steps:
        assert compose_character(s.eta, _lift_to(r.g_prime, s.eta.group)).coeffs == {}


def test_progression_decomposition():
    g = PolySeq(H, 1, {(1,): (F(1, 3) + F(1, 10 ** 7), F(1, 2), 0)})
    res, pieces = progression_decomposition(g, 600, 4, 1)
    q = res.period.q
    assert len(pieces) == min(q, 600)
    for p in pieces:
        assert p.step == q and p.bound <= res.M


def test_relative_square_heisenberg():
    sq = relative_square(H)
    assert sq.group.m == 4
    assert filtration_property_holds(sq.group)
    x, y = H.element((F(1, 2), 3, F(1, 7))), H.element((F(1, 2), 3, 2))
    assert sq.split(sq.pair(x, y)) == (x, y)
    with pytest.raises(ValueError):
        relative_square(torus(2))
    assert relative_square(torus(2).with_filtration((2, 2, 2))).group.m == 4


def test_vdc_square_sequences_are_polynomial():
    rng = random.Random(4)
    sq = relative_square(H)
    for _ in range(5):
        g = PolySeq(H, 1, {(1,): (F(rng.randint(-9, 9), 10), F(rng.randint(-9, 9), 10), F(rng.randint(-9, 9), 10)),
                           (2,): (0, 0, F(rng.randint(-9, 9), 7))})
        h = rng.randint(1, 6)
        s = vdc_square_sequence(g, h, sq)
        assert polynomial_membership_test(s, kmax=3, samples=20).ok
        for n in range(5):
            a, b = sq.split(s((n,)))
            assert b == g((n,))


def test_square_character_split():
    sq = relative_square(H)
    tested = 0
    for k in [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (2, -1, 5, 0), (0, 0, 0, 1)]:
        try:
            eta = HorizontalCharacter(sq.group, k)
        except ValueError:
            continue
        tested += 1
        res = split_square_character(eta, sq)
        assert res.annihilates
        x, y = H.element((F(1, 3), F(2, 5), 1)), H.element((F(1, 3), F(2, 5), F(1, 2)))
        lhs = eta.lift(sq.pair(x, y))
        diff = group_multiply(x, H.invert(y))
        rhs = sum(a * b for a, b in zip(res.k1, y.psi)) + sum(a * b for a, b in zip(res.k2, diff.psi))
        assert lhs == rhs
    assert tested == 4
