"""Sparse multivariate polynomials with rational coefficients.

Only what the BCH machinery needs: ring operations, degree, and compilation
of a tuple of polynomials into a plain Python function.  The compiled
functions work on Fractions, mpf values and numpy arrays alike.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Sequence, Tuple

Monomial = Tuple[int, ...]


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Dict[Monomial, Fraction] | None = None):
        self.nvars = nvars
        self.terms: Dict[Monomial, Fraction] = {}
        if terms:
            for mono, c in terms.items():
                if c != 0:
                    self.terms[mono] = Fraction(c)

    @classmethod
    def var(cls, nvars: int, i: int) -> "Poly":
        mono = tuple(1 if k == i else 0 for k in range(nvars))
        return cls(nvars, {mono: Fraction(1)})

    @classmethod
    def const(cls, nvars: int, c) -> "Poly":
        return cls(nvars, {(0,) * nvars: Fraction(c)})

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def variables(self) -> set:
        out = set()
        for mono in self.terms:
            out.update(i for i, e in enumerate(mono) if e)
        return out

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        return Poly.const(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for mono, c in other.terms.items():
            v = out.get(mono, 0) + c
            if v:
                out[mono] = v
            else:
                out.pop(mono, None)
        res = Poly(self.nvars)
        res.terms = out
        return res

    __radd__ = __add__

    def __neg__(self):
        res = Poly(self.nvars)
        res.terms = {m: -c for m, c in self.terms.items()}
        return res

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            other = Fraction(other)
            if other == 0:
                return Poly(self.nvars)
            res = Poly(self.nvars)
            res.terms = {m: c * other for m, c in self.terms.items()}
            return res
        out: Dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                v = out.get(mono, 0) + c1 * c2
                if v:
                    out[mono] = v
                else:
                    out.pop(mono, None)
        res = Poly(self.nvars)
        res.terms = out
        return res

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.terms == other.terms
        return self.terms == self._coerce(other).terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __call__(self, values: Sequence):
        total = 0
        for mono, c in self.terms.items():
            term = c
            for v, e in zip(values, mono):
                if e:
                    term = term * v ** e
            total = total + term
        return total

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        parts = []
        for mono in sorted(self.terms):
            vars_ = "*".join(f"x{i}^{e}" if e > 1 else f"x{i}" for i, e in enumerate(mono) if e)
            parts.append(f"{self.terms[mono]}" + (f"*{vars_}" if vars_ else ""))
        return "Poly(" + " + ".join(parts) + ")"


def _monomial_code(mono: Monomial, names: Sequence[str]) -> str:
    factors = []
    for name, e in zip(names, mono):
        if e == 1:
            factors.append(name)
        elif e > 1:
            factors.append(f"{name}**{e}")
    return "*".join(factors)


def compile_polys(polys: Sequence[Poly], arg_sizes: Sequence[int], *, floating: bool = False):
    """Compile polynomials into ``f(*vectors) -> tuple``.

    Variables are split into consecutive argument vectors of the given sizes.
    With ``floating=True`` the coefficients become Python floats, which keeps
    numpy arrays in float64.
    """
    nvars = sum(arg_sizes)
    names = [f"v{i}" for i in range(nvars)]
    consts: list = []
    lines = [f"def _f({', '.join(f'a{k}' for k in range(len(arg_sizes)))}):"]
    pos = 0
    for k, size in enumerate(arg_sizes):
        if size:
            lhs = ", ".join(names[pos:pos + size])
            lines.append(f"    {lhs}{',' if size == 1 else ''} = a{k}")
        pos += size
    exprs = []
    for p in polys:
        if p.nvars != nvars:
            raise ValueError("variable count mismatch")
        if not p.terms:
            exprs.append("0")
            continue
        pieces = []
        for mono in sorted(p.terms):
            c = p.terms[mono]
            body = _monomial_code(mono, names)
            if floating:
                coef = repr(float(c))
            elif c.denominator == 1:
                coef = str(c.numerator)
            else:
                consts.append(c)
                coef = f"K[{len(consts) - 1}]"
            if not body:
                pieces.append(f"({coef})")
            elif coef in ("1", "1.0"):
                pieces.append(body)
            elif coef in ("-1", "-1.0"):
                pieces.append(f"(-{body})")
            else:
                pieces.append(f"({coef})*{body}")
        exprs.append(" + ".join(pieces))
    lines.append("    return (" + ", ".join(exprs) + ("," if len(exprs) == 1 else "") + ")")
    namespace = {"K": tuple(consts)}
    exec("\n".join(lines), namespace)
    return namespace["_f"]


def max_degree(polys: Iterable[Poly]) -> int:
    return max((p.degree() for p in polys), default=0)
