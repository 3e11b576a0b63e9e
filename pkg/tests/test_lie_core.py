from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, strategies as st

from nilorbit.lie_core import (BasisMismatchError, Filtration, FiltrationError, LieAlgebraError, NilGroup,
                               bch_product_first_kind, commutator, coord_convert, direct_product, group_invert,
                               group_multiply, heisenberg, preset, subgroup, subgroup_malcev_basis, torus,
                               unitriangular)
from oracles import heis_matrix, heis_psi, ut_matrix

rat = st.fractions(min_value=-20, max_value=20, max_denominator=12)
H = heisenberg()
U4 = unitriangular(4)


def vec(m):
    return st.tuples(*[rat] * m)


@given(vec(3), vec(3))
def test_heisenberg_product_matches_matrices(t, u):
    x, y = H.element(t), H.element(u)
    assert group_multiply(x, y).psi == heis_psi(heis_matrix(t) * heis_matrix(u))


@given(vec(3))
def test_heisenberg_psi_of_matrix_roundtrip(t):
    assert heis_psi(heis_matrix(t)) == H.element(t).psi


def test_heisenberg_explicit_law():
    x, y = H.element((F(1, 2), 3, F(-1, 3))), H.element((2, F(5, 7), 1))
    # (t1+u1, t2+u2, t3+u3 - t2 u1)
    assert group_multiply(x, y).psi == (F(5, 2), F(26, 7), F(2, 3) - 6)


@given(vec(6), vec(6))
def test_ut4_product_matches_matrices(t, u):
    x, y = U4.element(t), U4.element(u)
    assert ut_matrix(4, group_multiply(x, y).psi) == ut_matrix(4, t) * ut_matrix(4, u)


@given(vec(6))
def test_ut4_inverse_matches_matrices(t):
    assert ut_matrix(4, group_invert(U4.element(t)).psi) == ut_matrix(4, t).inv()


@given(vec(6), vec(6), vec(6))
def test_associativity(a, b, c):
    x, y, z = (U4.element(v) for v in (a, b, c))
    assert group_multiply(group_multiply(x, y), z) == group_multiply(x, group_multiply(y, z))


@given(vec(3), vec(3))
def test_heisenberg_commutator(t, u):
    c = commutator(H.element(t), H.element(u))
    assert c.psi == (0, 0, t[0] * u[1] - t[1] * u[0])


@given(vec(6))
def test_exp_log_roundtrip(t):
    x = U4.element(t)
    assert U4.exp(U4.log(x)) == x
    assert coord_convert(U4, coord_convert(U4, t, "second->first"), "first->second") == x.psi


@given(vec(6), vec(6))
def test_bch_agrees_with_product(t, u):
    z = bch_product_first_kind(U4, t, u)
    assert U4.exp(z) == group_multiply(U4.exp(t), U4.exp(u))


def test_power_and_lattice():
    t = (F(1, 2), F(1, 3), 0)
    x = H.element(t)
    assert H.power(x, 6).psi == heis_psi(heis_matrix(t) ** 6)
    assert H.power(x, -2) == group_invert(H.power(x, 2))
    assert H.is_lattice(H.element((1, -2, 3)))
    assert not H.is_lattice(H.element((1, F(1, 2), 3)))


def test_mixed_scalars_are_tagged_approximate():
    x = H.element((mpmath.sqrt(2), 1, 0))
    y = H.element((F(1, 3), F(1, 2), 0))
    z = group_multiply(x, y)
    assert not z.exact
    assert abs(z.psi[0] - (mpmath.sqrt(2) + mpmath.mpf(1) / 3)) < mpmath.mpf(2) ** -120


def test_jacobi_failure_names_triple():
    entries = [(0, 1, 2, 1), (1, 2, 3, 1), (0, 3, 4, 1)]
    with pytest.raises(LieAlgebraError, match=r"\(1,2,3\)"):
        NilGroup.from_constants(5, entries)


def test_antisymmetry_violation():
    with pytest.raises(LieAlgebraError):
        NilGroup.from_constants(3, [(0, 1, 2, 1), (1, 0, 2, 1)])


def test_non_nilpotent_rejected():
    with pytest.raises(LieAlgebraError):
        NilGroup.from_constants(3, [(0, 1, 2, 1), (1, 2, 0, 1), (2, 0, 1, 1)])


def test_filtration_must_contain_commutators():
    with pytest.raises(FiltrationError):
        NilGroup.from_constants(3, [(0, 1, 2, 1)], Filtration((3, 3)))
    with pytest.raises(FiltrationError):
        Filtration((3, 2, 1))


def test_degree_two_abelian_filtration_allowed():
    g = torus(2).with_filtration((2, 2, 2))
    assert g.filtration.degree == 2


def test_elements_of_different_groups_do_not_mix():
    with pytest.raises(BasisMismatchError):
        group_multiply(H.element((1, 0, 0)), U4.element((1, 0, 0, 0, 0, 0)))


def test_presets():
    assert preset("torus:3").m == 3
    assert preset("ut:4").m == 6
    assert preset("Heisenberg").m == 3
    with pytest.raises(ValueError):
        preset("sl:2")


def test_direct_product_is_componentwise():
    G, p1, p2 = direct_product(H, H)
    assert G.m == 6 and G.filtration.dims == (6, 6, 2)
    t, u = (F(1, 2), 2, 0), (3, F(1, 3), 1)
    a = [0] * 6
    b = [0] * 6
    for i in range(3):
        a[p1[i]] = t[i]
        b[p2[i]] = u[i]
    for i in range(3):
        a[p2[i]] = u[i]
        b[p1[i]] = t[i]
    prod = group_multiply(G.element(a), G.element(b)).psi
    left = group_multiply(H.element(t), H.element(t)).psi
    right = group_multiply(H.element(u), H.element(u)).psi
    assert [prod[p1[i]] for i in range(3)] == list(left)
    assert [prod[p2[i]] for i in range(3)] == list(right)


def test_center_subgroup():
    basis = subgroup_malcev_basis(H, [(0, 0, 1)])
    Z = subgroup(H, basis)
    assert Z.m == 1
    x = Z.element((F(5, 2),))
    assert Z.to_parent(x).psi == (0, 0, F(5, 2))


def test_subgroup_with_scaled_generator_has_lattice_basis():
    basis = subgroup_malcev_basis(H, [(2, 0, 0), (0, 0, 3)])
    Z = subgroup(H, basis)
    # the Mal'cev basis generates G' ∩ Γ, so it is X1, X3 up to sign
    images = {tuple(abs(a) for a in Z.to_parent(Z.generator(i)).psi) for i in range(2)}
    assert images == {(1, 0, 0), (0, 0, 1)}
