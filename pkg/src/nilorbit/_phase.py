"""Fixed-point phase tables for polynomials in the binomial basis.

Phases are carried as integers modulo 2^126 split into three 42-bit limbs,
so iterated prefix sums in int64 stay exact within a block.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Sequence, Tuple

import mpmath
import numpy as np

from .scalar import Scalar, frac, is_exact

BITS = 126
LIMB = 42
MOD = 1 << BITS
_MASK = (1 << LIMB) - 1
BLOCK = 1 << 16


def fixed_point(x: Scalar) -> int:
    """floor(frac(x) * 2^BITS)."""
    if is_exact(x):
        f = Fraction(x)
        return (f.numerator * MOD // f.denominator) % MOD
    with mpmath.workprec(max(mpmath.mp.prec, BITS + 64)):
        return int(mpmath.floor(frac(mpmath.mpf(x)) * MOD)) % MOD


def _limbs(v: int) -> Tuple[int, int, int]:
    return v & _MASK, (v >> LIMB) & _MASK, (v >> 2 * LIMB) & _MASK


def _normalize(l0, l1, l2):
    c = l0 >> LIMB
    l0 &= _MASK
    l1 = l1 + c
    c = l1 >> LIMB
    l1 &= _MASK
    l2 = (l2 + c) & _MASK
    return l0, l1, l2


def _shifted_state(state: Sequence[int], shift: int) -> list:
    d = len(state) - 1
    return [sum(state[i] * math.comb(shift, i - j) for i in range(j, d + 1)) % MOD for j in range(d + 1)]


def binomial_phases(A: Sequence[int], start: int, count: int) -> np.ndarray:
    """frac(p(n)) for n = start .. start+count-1 where p(n) = sum_j A_j C(n, j) / 2^BITS."""
    d = len(A) - 1
    if count <= 0:
        return np.zeros(0)
    if d < 0:
        return np.zeros(count)
    # state_j = Δ^j p(start)
    state = [0] * (d + 1)
    for j in range(d + 1):
        state[j] = sum(A[i] * _gbinom(start, i - j) for i in range(j, d + 1)) % MOD
    out = np.empty(count)
    pos = 0
    while pos < count:
        b = min(BLOCK, count - pos)
        l0, l1, l2 = (np.full(b, x, dtype=np.int64) for x in _limbs(state[d]))
        for j in range(d - 1, -1, -1):
            s0, s1, s2 = _limbs(state[j])
            c0 = np.empty(b, dtype=np.int64)
            c1 = np.empty(b, dtype=np.int64)
            c2 = np.empty(b, dtype=np.int64)
            c0[0], c1[0], c2[0] = 0, 0, 0
            if b > 1:
                c0[1:] = np.cumsum(l0[:-1])
                c1[1:] = np.cumsum(l1[:-1])
                c2[1:] = np.cumsum(l2[:-1])
            l0, l1, l2 = _normalize(c0 + s0, c1 + s1, c2 + s2)
        out[pos:pos + b] = l2 / float(1 << LIMB) + l1 / float(1 << 2 * LIMB) + l0 / float(1 << BITS)
        state = _shifted_state(state, b)
        pos += b
    # limbs can round up to exactly 1.0
    out[out >= 1.0] -= 1.0
    return out


def _gbinom(n: int, j: int) -> int:
    if j < 0:
        return 0
    if n >= 0:
        return math.comb(n, j)
    num = 1
    for i in range(j):
        num *= n - i
    return num // math.factorial(j)


def grid_phases(A: Dict[Tuple[int, ...], int], sizes: Sequence[int], start: int = 1) -> np.ndarray:
    """Phases over the box prod_i {start .. start+N_i-1}, returned with shape sizes."""
    t = len(sizes)
    if t == 1:
        d = max((j[0] for j in A), default=0)
        coeffs = [0] * (d + 1)
        for j, v in A.items():
            coeffs[j[0]] = (coeffs[j[0]] + v) % MOD
        return binomial_phases(coeffs, start, sizes[0])
    rows = []
    for n1 in range(start, start + sizes[0]):
        sub: Dict[Tuple[int, ...], int] = {}
        for j, v in A.items():
            c = _gbinom(n1, j[0])
            if c:
                sub[j[1:]] = (sub.get(j[1:], 0) + v * c) % MOD
        rows.append(grid_phases(sub, sizes[1:], start))
    return np.stack(rows)


def exp_mean(phases: np.ndarray) -> complex:
    """E e(phase) with correctly rounded summation."""
    ang = 2 * np.pi * phases.ravel()
    n = ang.size
    return complex(math.fsum(np.cos(ang)) / n, math.fsum(np.sin(ang)) / n)
