"""Independent reference implementations used by the tests.

Nothing here imports the group law from nilorbit: matrices are multiplied
with sympy, binomials are expanded symbolically, and minima are found by
brute force.
"""

from fractions import Fraction
import math

import mpmath
import sympy as sp


def ut_units(n):
    return [(a, a + lev) for lev in range(1, n) for a in range(n - lev)]


def ut_matrix(n, psi):
    """prod_i (I + t_i E_{a_i b_i}) in the basis order; E_ab squares to zero."""
    M = sp.eye(n)
    for t, (a, b) in zip(psi, ut_units(n)):
        E = sp.eye(n)
        E[a, b] = sp.Rational(t.numerator, t.denominator)
        M = M * E
    return M


def heis_matrix(psi):
    x, z, w = psi
    y = w + x * z
    return sp.Matrix([[1, sp.Rational(x.numerator, x.denominator), sp.Rational(y.numerator, y.denominator)],
                      [0, 1, sp.Rational(z.numerator, z.denominator)],
                      [0, 0, 1]])


def heis_psi(M):
    """(x, z, y - xz) read off an upper unitriangular 3x3 matrix."""
    x, y, z = (Fraction(int(sp.numer(v)), int(sp.denom(v))) for v in (M[0, 1], M[0, 2], M[1, 2]))
    return (x, z, y - x * z)


def rebasing_oracle(a, b, jmax):
    """c(j', j) with C((n - a)/b, j) = sum_j' c(j', j) C(n, j').

    Expands in the power basis with sympy, then uses n^k = sum_i S(k, i) i! C(n, i).
    """
    from sympy.functions.combinatorial.numbers import stirling

    n = sp.Symbol("n")
    A = sp.Rational(a.numerator, a.denominator)
    B = sp.Rational(b.numerator, b.denominator)
    out = {}
    for j in range(jmax + 1):
        x = (n - A) / B
        poly = sp.Poly(sp.expand(sp.prod([x - i for i in range(j)]) / sp.factorial(j)), n)
        for jp in range(j + 1):
            c = sum(poly.coeff_monomial(n ** k) * stirling(k, jp) * sp.factorial(jp) for k in range(jp, j + 1))
            c = sp.Rational(c)
            out[(jp, j)] = Fraction(int(c.p), int(c.q))
    return out


def norm_rz(x):
    f = x - math.floor(x)
    return min(f, 1 - f)


def brute_kronecker(alpha, K):
    """min over 1 <= k <= K of ||k alpha||, ties to the smallest k."""
    best = None
    for k in range(1, K + 1):
        v = norm_rz(k * alpha)
        if best is None or v < best[1]:
            best = (k, v)
    return best


def weyl_sum_mp(coeffs, N, dps=40):
    """(1/N) sum_{n=1}^N e(sum_j a_j C(n, j)) in mpmath."""
    with mpmath.workdps(dps):
        s = mpmath.mpc(0)
        for n in range(1, N + 1):
            ph = sum(mpmath.mpf(a.numerator) / a.denominator * math.comb(n, j) if isinstance(a, Fraction)
                     else mpmath.mpf(a) * math.comb(n, j) for j, a in coeffs.items())
            s += mpmath.expjpi(2 * ph)
        return complex(s / N)


def vdc_sides(a, H):
    """Both sides of the van der Corput inequality computed by direct sums."""
    N = len(a)
    lhs = abs(sum(a) / N) ** 2
    acc = 0.0
    for h in range(-(H - 1), H):
        c = 0j
        for n in range(N):
            if 0 <= n + h < N:
                c += a[n + h] * a[n].conjugate()
        acc += (1 - abs(h) / H) * (c / N).real
    return lhs, (N + H) / (H * N) * acc
