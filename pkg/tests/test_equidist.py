import cmath
import math
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest

from nilorbit.equidist import (certify_equidistribution, certify_total_equidistribution, character_spectrum,
                               horizontal_characters, lipschitz_average, orbit_array, orbit_sample, progressions)
from nilorbit.lie_core import heisenberg, torus, unitriangular
from nilorbit.polyseq import PolySeq, linear_sequence

H = heisenberg()


def exact_sum(g, k, N):
    """(1/N) sum e(k·ψ(g(n))) from exact rational coordinates."""
    s = 0j
    for n in range(1, N + 1):
        ph = sum(a * b for a, b in zip(k, g.psi((n,)))) % 1
        s += cmath.exp(2j * math.pi * float(ph))
    return s / N


def test_character_enumeration():
    assert horizontal_characters(torus(2), 1) == [(0, 1), (1, -1), (1, 0), (1, 1)]
    chars = horizontal_characters(H, 2)
    assert all(k[2] == 0 for k in chars)
    assert len(chars) == (5 * 5 - 1) // 2
    assert all(next(a for a in k if a) > 0 for k in chars)
    assert all(k[3:] == (0, 0, 0) for k in horizontal_characters(unitriangular(4), 1))


def test_spectrum_matches_exact_sums():
    g = PolySeq(H, 1, {(1,): (F(3, 17), F(5, 23), F(1, 3)), (2,): (0, 0, F(2, 7))})
    rep = character_spectrum(g, 400, 3)
    for e in rep.entries:
        assert abs(e.S - exact_sum(g, e.k, 400)) < 1e-12


def test_spectrum_threads_are_deterministic():
    g = PolySeq(torus(3), 1, {(1,): (mpmath.sqrt(2), mpmath.sqrt(3), mpmath.sqrt(5))})
    a = character_spectrum(g, 3000, 3, threads=1)
    b = character_spectrum(g, 3000, 3, threads=4)
    assert [(e.k, e.S) for e in a.entries] == [(e.k, e.S) for e in b.entries]


def test_equidistributed_torus():
    g = PolySeq(torus(2), 1, {(1,): (mpmath.sqrt(2), mpmath.sqrt(3))})
    c = certify_equidistribution(g, 10 ** 4, 0.05, 5)
    assert c.equidistributed and c.kind == "equidistributed"
    assert c.max_abs < 0.05 and c.eta is None


def test_rational_obstruction():
    g = PolySeq(torus(1), 1, {(1,): (F(1, 3),)})
    c = certify_equidistribution(g, 300, 0.1, 5)
    assert c.kind == "obstruction"
    assert c.eta.k == (3,) and abs(c.S - 1) < 1e-12
    assert c.value == 0


def test_near_rational_reports_multiplier():
    g = PolySeq(torus(1), 1, {(1,): (F(1, 3) + F(1, 10 ** 6),)})
    c = certify_equidistribution(g, 1000, 0.1, 5, Q=5)
    assert c.eta.k == (3,)
    assert c.value == F(3, 10 ** 6) * 1000
    assert c.q == 1


def test_total_equidistribution_catches_progressions():
    g = PolySeq(torus(1), 1, {(1,): (F(1, 7),)})
    assert certify_equidistribution(g, 700, 0.1, 5).equidistributed
    tc = certify_total_equidistribution(g, 700, 0.1, 5, q_max=10)
    assert not tc.equidistributed
    assert tc.certificate.progression[1] == 7
    assert tc.checked > 1


def test_progressions_cover_lengths():
    ps = list(progressions(100, 0.2, q_max=3))
    assert (0, 1, 100) in ps
    assert all(L >= 20 for _, _, L in ps)
    assert all(r + q * (L - 1) <= 100 for r, q, L in ps)


def test_orbit_sample_is_reduced_and_matches_array():
    g = PolySeq(H, 1, {(1,): (mpmath.sqrt(2), mpmath.sqrt(3), 0), (2,): (0, 0, mpmath.sqrt(5))})
    pts = list(orbit_sample(g, 50))
    assert all(0 <= a < 1 for p in pts for a in p)
    arr = orbit_array(g, 50)
    assert np.max(np.abs(arr - np.array([[float(a) for a in p] for p in pts]))) < 1e-9


def test_lipschitz_average_small_for_equidistributed_orbit():
    g = PolySeq(torus(2), 1, {(1,): (mpmath.sqrt(2), mpmath.sqrt(3))})
    d = lipschitz_average(lambda x: math.cos(2 * math.pi * x[0]) * x[1], g, 20000)
    assert abs(d) < 0.01


def test_bad_parameters():
    g = PolySeq(torus(1), 1, {(1,): (F(1, 3),)})
    with pytest.raises(ValueError):
        certify_equidistribution(g, 100, 0.1, 0)


def test_skew_torus_first_coordinate_character():
    # the (0,1,0) character sees the integer X2 coordinate (|S| = 1, value 0)
    # and wins the largest-|S| selection; the first coordinate carries 2nα
    N = 10 ** 4
    alpha = F(1, 10 ** 6)
    g = linear_sequence(H.element((2 * alpha, 1, -alpha)))
    rep = character_spectrum(g, N, 2)
    S = {e.k: e.S for e in rep.entries}
    assert abs(S[(0, 1, 0)]) == pytest.approx(1, abs=1e-15)
    assert 0.99 < abs(S[(1, 0, 0)]) < 1
    c = certify_equidistribution(g, N, 0.05, 2)
    assert c.eta.k == (0, 1, 0) and c.value == 0
