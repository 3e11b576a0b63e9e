from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from nilorbit.lie_core import group_multiply, heisenberg, torus, unitriangular
from nilorbit.nilmanifold import (CharacterError, HorizontalCharacter, Nilmanifold, VerticalCharacter,
                                  horizontal_lattice, metric_estimate, quotient_metric_estimate,
                                  rational_point_check, reduce_fundamental)
from oracles import heis_matrix, heis_psi

rat = st.fractions(min_value=-30, max_value=30, max_denominator=16)
H = heisenberg()
U4 = unitriangular(4)


@given(st.tuples(rat, rat, rat, rat, rat, rat))
def test_reduction_is_fundamental(t):
    x = U4.element(t)
    red = reduce_fundamental(x)
    assert all(0 <= a < 1 for a in red.frac.psi)
    assert U4.is_lattice(red.lat)
    assert group_multiply(red.frac, red.lat) == x


def test_reduction_with_approximate_coordinates():
    x = H.element((mpmath.sqrt(2) * 10, F(-7, 3), mpmath.pi))
    fr, lat = reduce_fundamental(x)
    assert all(0 <= a < 1 for a in fr.psi)
    assert all(a == int(a) for a in lat.psi)
    assert max(abs(a - b) for a, b in zip(group_multiply(fr, lat).psi, x.psi)) < 1e-30


def test_reduction_flags_boundary():
    assert reduce_fundamental(H.element((mpmath.mpf(3) - mpmath.mpf(2) ** -80, 0, 0))).boundary_ambiguous
    assert not reduce_fundamental(H.element((F(1, 2), 0, 0))).boundary_ambiguous


@given(st.tuples(rat, rat, rat), st.tuples(rat, rat, rat))
def test_metric_estimate_basic(t, u):
    x, y = H.element(t), H.element(u)
    d = metric_estimate(x, y)
    assert d >= 0
    assert d == metric_estimate(y, x)
    assert metric_estimate(x, x) == 0
    assert metric_estimate(x, y, refine=1) <= d


def test_refinement_shortens_long_paths():
    x = H.element((0, 0, 16))
    # exp(16 X3) = [exp(4 X1), exp(4 X2)], so short paths exist
    assert metric_estimate(x, H.identity(), refine=3) < metric_estimate(x, H.identity())


@settings(max_examples=25)
@given(st.tuples(rat, rat, rat), st.tuples(*[st.integers(-1, 1)] * 3))
def test_quotient_metric_ignores_lattice_translates(t, g):
    # ψ(g^-1) stays inside the searched box |ψ| <= 2
    x = H.element(t)
    assert quotient_metric_estimate(x, group_multiply(x, H.element(g)), radius=2) == 0
    assert quotient_metric_estimate(x, H.identity()) <= metric_estimate(x, H.identity())


def _brute_order(t, Q=200):
    M = heis_matrix(t)
    P = M
    for r in range(1, Q + 1):
        if all(a == int(a) for a in heis_psi(P)):
            return r
        P = P * M
    return None


@given(st.tuples(*[st.fractions(min_value=-3, max_value=3, max_denominator=7)] * 3))
def test_rational_point_order_matches_matrix_powers(t):
    v = rational_point_check(H.element(t), Q=200)
    assert v.kind == "rational"
    assert v.r == _brute_order(t)


def test_irrational_point():
    v = rational_point_check(H.element((mpmath.sqrt(2), 0, 0)), Q=500)
    assert v.kind == "irrational"


def test_horizontal_characters():
    with pytest.raises(CharacterError):
        HorizontalCharacter(H, (0, 0, 1))
    with pytest.raises(CharacterError):
        HorizontalCharacter(H, (1, 2))
    eta = HorizontalCharacter(H, (2, -3, 0))
    assert eta(H.element((F(1, 4), F(1, 2), 7))) == F(0)
    assert eta.modulus == 3
    coords, aligned = horizontal_lattice(H)
    assert coords == [0, 1] and aligned


@given(st.tuples(rat, rat, rat), st.tuples(rat, rat, rat), st.integers(-5, 5), st.integers(-5, 5))
def test_horizontal_character_is_homomorphism(t, u, k1, k2):
    eta = HorizontalCharacter(H, (k1, k2, 0))
    x, y = H.element(t), H.element(u)
    assert eta(group_multiply(x, y)) == (eta(x) + eta(y)) % 1
    assert eta(H.element((1, -4, 9))) == 0


def test_vertical_character():
    xi = VerticalCharacter(H, (3,))
    assert xi(H.element((0, 0, F(5, 6)))) == F(1, 2)
    with pytest.raises(CharacterError):
        xi(H.element((1, 0, 0)))


def test_lattice_closure_spot_check():
    assert Nilmanifold(U4).lattice_spot_check()
    assert Nilmanifold(torus(2)).height == 1
