"""Exact linear algebra over Q on lists of Fractions."""

from __future__ import annotations

from fractions import Fraction
from typing import List, Sequence, Tuple

Vec = Tuple[Fraction, ...]


def rref(rows: Sequence[Sequence]) -> Tuple[List[Vec], List[int]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    mat = [[Fraction(x) for x in r] for r in rows]
    if not mat:
        return [], []
    ncols = len(mat[0])
    pivots: List[int] = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(mat)) if mat[i][col] != 0), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        lead = mat[r][col]
        mat[r] = [x / lead for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][col] != 0:
                f = mat[i][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivots.append(col)
        r += 1
        if r == len(mat):
            break
    return [tuple(row) for row in mat[:r]], pivots


def rank(rows) -> int:
    return len(rref(rows)[0])


def in_span(vec, rows) -> bool:
    if not rows:
        return all(x == 0 for x in vec)
    return rank(list(rows) + [vec]) == rank(rows)


def solve_in_basis(vec, basis) -> List[Fraction] | None:
    """Coefficients c with sum c_i basis_i = vec, or None."""
    n = len(basis)
    if n == 0:
        return [] if all(x == 0 for x in vec) else None
    # augmented system: columns are basis vectors
    rows = [[Fraction(basis[j][i]) for j in range(n)] + [Fraction(vec[i])] for i in range(len(vec))]
    red, piv = rref(rows)
    if n in piv:
        return None
    coeffs = [Fraction(0)] * n
    for row, p in zip(red, piv):
        coeffs[p] = row[n]
    return coeffs


def nullspace(rows, ncols: int) -> List[Vec]:
    """Basis of {x : rows . x = 0}."""
    red, piv = rref(rows) if rows else ([], [])
    free = [c for c in range(ncols) if c not in piv]
    out = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(red, piv):
            v[p] = -row[f]
        out.append(tuple(v))
    return out


def intersect(a_rows, b_rows, ncols: int) -> List[Vec]:
    """Basis of span(a) ∩ span(b)."""
    if not a_rows or not b_rows:
        return []
    na = len(a_rows)
    # solve sum x_i a_i - sum y_j b_j = 0
    cols = [list(r) for r in a_rows] + [[-x for x in r] for r in b_rows]
    system = [[Fraction(cols[k][i]) for k in range(len(cols))] for i in range(ncols)]
    ns = nullspace(system, len(cols))
    out = []
    for v in ns:
        vec = [sum((v[k] * Fraction(a_rows[k][i]) for k in range(na)), Fraction(0)) for i in range(ncols)]
        out.append(tuple(vec))
    red, _ = rref(out)
    return red
