"""Nilpotent Lie groups in Mal'cev coordinates.

A :class:`NilGroup` is presented by rational structure constants
``[X_i, X_j] = sum_k c_ijk X_k`` in a basis that is assumed to be a Mal'cev
basis: the lattice is the set of points with integer second-kind
coordinates ``psi(g) = (t_1, ..., t_m)``, ``g = exp(t_1 X_1) ... exp(t_m X_m)``.

Multiplication, inversion and both coordinate conversions are polynomial
maps.  They are derived once per group from a truncated Dynkin expansion of
the Baker-Campbell-Hausdorff series over exact rationals, then compiled to
Python functions.  Indices are 0-based in code and 1-based in files.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import _linalg as la
from .poly import Poly, compile_polys, max_degree
from .scalar import Scalar, is_exact, is_integer, is_zero, normalize, height


class LieAlgebraError(ValueError):
    """Structure constants that do not define a nilpotent Lie algebra."""


class NestingError(LieAlgebraError):
    def __init__(self, detail: str = ""):
        super().__init__("nesting required" + (f": {detail}" if detail else ""))


class FiltrationError(ValueError):
    pass


class BasisMismatchError(ValueError):
    pass


class RationalityError(ValueError):
    """A subgroup that is not rational with respect to the lattice."""

    def __init__(self, msg: str, index: int | None = None):
        super().__init__(msg)
        self.index = index


class BracketClosureError(ValueError):
    def __init__(self, pair: Tuple[int, int]):
        super().__init__(f"generators are not closed under the bracket: pair {pair}")
        self.pair = pair


def _nonzero(x) -> bool:
    if isinstance(x, Poly):
        return not x.is_zero()
    return x != 0


# --------------------------------------------------------------------- algebra


@dataclass(frozen=True)
class LieAlgebraData:
    """Structure constants, stored sparsely as (i, j, k, c) with c != 0."""

    m: int
    entries: Tuple[Tuple[int, int, int, Fraction], ...]
    s: int

    @classmethod
    def from_entries(cls, m: int, entries) -> "LieAlgebraData":
        table: Dict[Tuple[int, int, int], Fraction] = {}
        for e in entries:
            i, j, k, c = e
            if not (0 <= i < m and 0 <= j < m and 0 <= k < m):
                raise LieAlgebraError(f"index out of range in structure constant {(i + 1, j + 1, k + 1)}")
            c = Fraction(c)
            if i == j and c != 0:
                raise LieAlgebraError(f"antisymmetry fails: c[{i + 1},{i + 1},{k + 1}] = {c}")
            for key, val in (((i, j, k), c), ((j, i, k), -c)):
                old = table.get(key)
                if old is not None and old != val:
                    raise LieAlgebraError(
                        f"antisymmetry fails at (i,j,k)=({key[0] + 1},{key[1] + 1},{key[2] + 1})")
                table[key] = val
        sparse = tuple(sorted((i, j, k, c) for (i, j, k), c in table.items() if c != 0))
        alg = cls(m, sparse, 0)
        alg._check_jacobi()
        s = alg._infer_step()
        return cls(m, sparse, s)

    def bracket(self, x: Sequence, y: Sequence) -> list:
        out: list = [0] * self.m
        for i, j, k, c in self.entries:
            xi = x[i]
            if not _nonzero(xi):
                continue
            yj = y[j]
            if not _nonzero(yj):
                continue
            out[k] = out[k] + c * (xi * yj)
        return out

    def constant(self, i: int, j: int, k: int) -> Fraction:
        for a, b, cc, c in self.entries:
            if (a, b, cc) == (i, j, k):
                return c
        return Fraction(0)

    def _unit(self, i):
        return [Fraction(int(a == i)) for a in range(self.m)]

    def _check_jacobi(self):
        m = self.m
        units = [self._unit(i) for i in range(m)]
        for i, j, l in itertools.combinations(range(m), 3):
            a = self.bracket(units[i], self.bracket(units[j], units[l]))
            b = self.bracket(units[j], self.bracket(units[l], units[i]))
            c = self.bracket(units[l], self.bracket(units[i], units[j]))
            for k in range(m):
                if a[k] + b[k] + c[k] != 0:
                    raise LieAlgebraError(
                        f"Jacobi identity fails for (i,j,k)=({i + 1},{j + 1},{l + 1}) in component {k + 1}")

    def _infer_step(self) -> int:
        """Length of the lower central series, by iterated brackets."""
        units = [self._unit(i) for i in range(self.m)]
        current, _ = la.rref(units)
        step = 0
        while current:
            step += 1
            nxt = [tuple(self.bracket(u, v)) for u in units for v in current]
            nxt = [v for v in nxt if any(v)]
            current, _ = la.rref(nxt) if nxt else ([], [])
            if step > self.m + 1:
                raise LieAlgebraError("structure constants are not nilpotent")
        return step

    def lower_central_series(self) -> List[List[tuple]]:
        units = [tuple(self._unit(i)) for i in range(self.m)]
        series = [la.rref(units)[0]]
        while series[-1]:
            nxt = [tuple(self.bracket(u, v)) for u in units for v in series[-1]]
            nxt = [v for v in nxt if any(v)]
            series.append(la.rref(nxt)[0] if nxt else [])
        return series


# ------------------------------------------------------------------ filtration


@dataclass(frozen=True)
class Filtration:
    """dims = (m_0, m_1, ..., m_d); G_i is spanned by the last m_i vectors."""

    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(x) for x in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 2:
            raise FiltrationError("filtration needs at least m_0 and m_1")
        if dims[0] != dims[1]:
            raise FiltrationError(f"m_0 must equal m_1, got {dims[0]} and {dims[1]}")
        for a, b in zip(dims, dims[1:]):
            if b > a:
                raise FiltrationError(f"filtration dims must be nonincreasing: {dims}")
        if dims[-1] < 0:
            raise FiltrationError("negative dimension")

    @property
    def m(self) -> int:
        return self.dims[0]

    @property
    def degree(self) -> int:
        return len(self.dims) - 1

    def dim(self, i: int) -> int:
        if i < 0:
            raise ValueError("negative filtration index")
        return self.dims[i] if i < len(self.dims) else 0

    def first_index(self, i: int) -> int:
        """0-based index of the first basis vector spanning G_i."""
        return self.m - self.dim(i)

    def level(self, a: int) -> int:
        """Largest i with X_a in G_i (X_a lies in G_1 at least)."""
        lev = 1
        for i in range(2, len(self.dims)):
            if a >= self.first_index(i):
                lev = i
        return lev

    def allowed(self, a: int, deg: int) -> bool:
        """May coordinate a carry a Taylor coefficient of total degree deg?"""
        return a >= self.first_index(deg)


# ------------------------------------------------------------------- BCH core

_WORD_CACHE: Dict[int, Dict[Tuple[int, ...], Fraction]] = {}


def dynkin_words(s: int) -> Dict[Tuple[int, ...], Fraction]:
    """Coefficients of right-nested words in X (0) and Y (1) up to length s."""
    if s in _WORD_CACHE:
        return _WORD_CACHE[s]
    pairs = [(r, q) for r in range(s + 1) for q in range(s + 1) if 1 <= r + q <= s]
    words: Dict[Tuple[int, ...], Fraction] = {}

    def rec(n_left: int, total: int, seq: list):
        if seq:
            n = len(seq)
            coef = Fraction((-1) ** (n - 1), n * total)
            for r, q in seq:
                coef /= math.factorial(r) * math.factorial(q)
            word = tuple(itertools.chain.from_iterable([0] * r + [1] * q for r, q in seq))
            words[word] = words.get(word, Fraction(0)) + coef
        if n_left == 0:
            return
        for r, q in pairs:
            if total + r + q <= s:
                rec(n_left - 1, total + r + q, seq + [(r, q)])

    rec(s, 0, [])
    words = {w: c for w, c in words.items() if c != 0 and not (len(w) >= 2 and w[-1] == w[-2])}
    _WORD_CACHE[s] = words
    return words


def bch(alg: LieAlgebraData, x: Sequence, y: Sequence) -> list:
    """log(exp(x) exp(y)) truncated at bracket depth s, over any ring."""
    if not any(_nonzero(v) for v in x):
        return list(y)
    if not any(_nonzero(v) for v in y):
        return list(x)
    memo: Dict[Tuple[int, ...], list] = {}
    letters = (list(x), list(y))

    def nested(word):
        if len(word) == 1:
            return letters[word[0]]
        if word in memo:
            return memo[word]
        val = alg.bracket(letters[word[0]], nested(word[1:]))
        memo[word] = val
        return val

    out: list = [0] * alg.m
    for word, coef in dynkin_words(max(alg.s, 1)).items():
        vec = nested(word)
        for k in range(alg.m):
            if _nonzero(vec[k]):
                out[k] = out[k] + coef * vec[k]
    return out


def _second_to_first(alg: LieAlgebraData, t: Sequence) -> list:
    z: list = [0] * alg.m
    for i in range(alg.m):
        if _nonzero(t[i]):
            unit = [0] * alg.m
            unit[i] = t[i]
            z = bch(alg, z, unit)
    return z


def _first_to_second(alg: LieAlgebraData, v: Sequence) -> list:
    z = list(v)
    out = []
    for i in range(alg.m):
        ti = z[i]
        out.append(ti)
        if _nonzero(ti):
            unit = [0] * alg.m
            unit[i] = -ti
            z = bch(alg, unit, z)
    return out


class _PolyTables:
    """Cached coordinate polynomials and their compiled forms."""

    def __init__(self, alg: LieAlgebraData):
        m = alg.m
        tv = [Poly.var(m, i) for i in range(m)]
        self.log = [Poly(m) + p for p in _second_to_first(alg, tv)]
        self.exp = [Poly(m) + p for p in _first_to_second(alg, tv)]
        t2 = [Poly.var(2 * m, i) for i in range(2 * m)]
        t, u = t2[:m], t2[m:]
        z = bch(alg, _second_to_first(alg, t), _second_to_first(alg, u))
        self.mul = [Poly(2 * m) + p for p in _first_to_second(alg, z)]
        self.inv = [Poly(m) + p for p in _first_to_second(alg, [-p for p in _second_to_first(alg, tv)])]
        self.bch = [Poly(2 * m) + p for p in bch(alg, t, u)]
        self.mul_degree = max(1, max_degree(self.mul))
        self.inv_degree = max(1, max_degree(self.inv))
        self.conv_degree = max(1, max_degree(self.log), max_degree(self.exp))
        self.f_log = compile_polys(self.log, [m])
        self.f_exp = compile_polys(self.exp, [m])
        self.f_mul = compile_polys(self.mul, [m, m])
        self.f_inv = compile_polys(self.inv, [m])
        self.f_bch = compile_polys(self.bch, [m, m])
        self.g_mul = compile_polys(self.mul, [m, m], floating=True)
        self.g_inv = compile_polys(self.inv, [m], floating=True)
        self.g_log = compile_polys(self.log, [m], floating=True)
        self.g_exp = compile_polys(self.exp, [m], floating=True)
        # nonlinear corrections P_i = psi(xy)_i - t_i - u_i
        self.corrections = [self.mul[i] - Poly.var(2 * m, i) - Poly.var(2 * m, m + i) for i in range(m)]


# ----------------------------------------------------------------- the group


@dataclass(frozen=True)
class MalcevBasis:
    """Basis vectors as rational combinations of a reference basis."""

    vectors: Tuple[Tuple[Fraction, ...], ...]
    filtration: Filtration
    height: int = 1
    nested: bool = True
    scales: Tuple[Fraction, ...] = ()

    @classmethod
    def standard(cls, filtration: Filtration) -> "MalcevBasis":
        m = filtration.m
        vecs = tuple(tuple(Fraction(int(i == j)) for j in range(m)) for i in range(m))
        return cls(vecs, filtration, 1, True, tuple(Fraction(1) for _ in range(m)))

    @property
    def dimension(self) -> int:
        return len(self.vectors)


class NilGroup:
    """Connected, simply connected nilpotent Lie group with a Mal'cev basis."""

    def __init__(self, algebra: LieAlgebraData, filtration=None, *, name: str | None = None,
                 basis: MalcevBasis | None = None, parent: "NilGroup | None" = None):
        self.algebra = algebra
        self.m = algebra.m
        self.name = name or f"group[{algebra.m}]"
        self._check_nesting()
        if filtration is None:
            filtration = self._lower_central_filtration()
        if not isinstance(filtration, Filtration):
            filtration = Filtration(tuple(filtration))
        if filtration.m != self.m:
            raise FiltrationError(f"filtration has m_0={filtration.m} but the group has dimension {self.m}")
        self.filtration = filtration
        self._check_filtration()
        self.basis = basis or MalcevBasis.standard(filtration)
        self.parent = parent
        self._tables: Optional[_PolyTables] = None
        self._lock = threading.Lock()
        self._sub_left_inverse = None
        if parent is not None:
            self._prepare_embedding()

    # construction helpers -------------------------------------------------
    @classmethod
    def from_constants(cls, m: int, constants, filtration=None, name=None) -> "NilGroup":
        """``constants`` is an iterable of (i, j, k, c) with 0-based indices."""
        return cls(LieAlgebraData.from_entries(m, constants), filtration, name=name)

    def with_filtration(self, dims) -> "NilGroup":
        if self.parent is not None:
            raise FiltrationError("refiltering a subgroup is not supported")
        g = NilGroup(self.algebra, Filtration(tuple(dims)), name=self.name)
        g._tables = self._tables
        return g

    def _check_nesting(self):
        for i, j, k, c in self.algebra.entries:
            if k <= max(i, j):
                raise NestingError(f"[X_{i + 1}, X_{j + 1}] has a component along X_{k + 1}")

    def _lower_central_filtration(self) -> Filtration:
        series = self.algebra.lower_central_series()
        dims = [self.m]
        for sub in series:
            dims.append(len(sub))
        while dims and dims[-1] == 0:
            dims.pop()
        if len(dims) < 2:
            dims = [self.m, self.m]
        for i, sub in enumerate(series[1:], start=2):
            start = self.m - len(sub)
            trailing = [tuple(Fraction(int(a == b)) for b in range(self.m)) for a in range(start, self.m)]
            if la.rank(list(sub) + trailing) != len(trailing):
                raise FiltrationError(
                    "lower central series is not spanned by trailing basis vectors; give a filtration")
        return Filtration(tuple(dims))

    def _check_filtration(self):
        f = self.filtration
        for i, j, k, c in self.algebra.entries:
            need = f.level(i) + f.level(j)
            if need > f.degree or f.level(k) < need:
                raise FiltrationError(
                    f"[G_{f.level(i)}, G_{f.level(j)}] not inside G_{need}: "
                    f"[X_{i + 1}, X_{j + 1}] has a component along X_{k + 1}")

    # polynomial tables -----------------------------------------------------
    @property
    def tables(self) -> _PolyTables:
        if self._tables is None:
            with self._lock:
                if self._tables is None:
                    self._tables = _PolyTables(self.algebra)
        return self._tables

    @property
    def step(self) -> int:
        return self.algebra.s

    @property
    def degree(self) -> int:
        return self.filtration.degree

    def __repr__(self):
        return f"NilGroup({self.name}, m={self.m}, filtration={self.filtration.dims})"

    # elements ----------------------------------------------------------------
    def element(self, psi) -> "GroupElement":
        psi = tuple(normalize(x) for x in psi)
        if len(psi) != self.m:
            raise ValueError(f"expected {self.m} coordinates, got {len(psi)}")
        return GroupElement(psi, self)

    def identity(self) -> "GroupElement":
        return GroupElement(tuple(Fraction(0) for _ in range(self.m)), self)

    def generator(self, i: int, t=1) -> "GroupElement":
        psi = [Fraction(0)] * self.m
        psi[i] = normalize(t)
        return self.element(psi)

    def _key(self):
        parent = self.parent._key() if self.parent is not None else None
        return (self.algebra.entries, self.m, self.filtration.dims, self.basis.vectors, parent)

    def __eq__(self, other):
        return self is other or (isinstance(other, NilGroup) and self._key() == other._key())

    def __hash__(self):
        return hash(self._key())

    def _same(self, *elems):
        for e in elems:
            if e.group is not self and e.group != self:
                raise BasisMismatchError(f"element belongs to {e.group!r}, not {self!r}")

    def multiply(self, x: "GroupElement", y: "GroupElement") -> "GroupElement":
        self._same(x, y)
        return GroupElement(self.tables.f_mul(x.psi, y.psi), self)

    def invert(self, x: "GroupElement") -> "GroupElement":
        self._same(x)
        return GroupElement(self.tables.f_inv(x.psi), self)

    def commutator(self, x: "GroupElement", y: "GroupElement") -> "GroupElement":
        return self.multiply(self.multiply(x, y), self.multiply(self.invert(x), self.invert(y)))

    def power(self, x: "GroupElement", n: int) -> "GroupElement":
        if n < 0:
            return self.power(self.invert(x), -n)
        result = self.identity()
        base = x
        while n:
            if n & 1:
                result = self.multiply(result, base)
            base = self.multiply(base, base)
            n >>= 1
        return result

    def exp(self, v) -> "GroupElement":
        """Element with first-kind coordinates v."""
        return GroupElement(self.tables.f_exp(tuple(normalize(a) for a in v)), self)

    def log(self, x: "GroupElement") -> tuple:
        self._same(x)
        return self.tables.f_log(x.psi)

    def is_lattice(self, x: "GroupElement", tol: float = 1e-12) -> bool:
        return all(is_integer(a, tol) for a in x.psi)

    def bracket(self, v, w) -> tuple:
        return tuple(Fraction(0) + a for a in self.algebra.bracket(v, w))

    # batch float evaluation (numpy arrays) -----------------------------------
    def multiply_float(self, t, u):
        return self.tables.g_mul(t, u)

    def invert_float(self, t):
        return self.tables.g_inv(t)

    # subgroup embedding ------------------------------------------------------
    def _prepare_embedding(self):
        vecs = [list(v) for v in self.basis.vectors]
        red, piv = la.rref(vecs)
        # choose coordinates where the basis is independent and invert there
        cols = []
        for col in range(self.parent.m):
            trial = cols + [col]
            sub = [[v[c] for c in trial] for v in vecs]
            if la.rank([list(r) for r in zip(*sub)]) == len(trial):
                cols = trial
            if len(cols) == len(vecs):
                break
        square = [[vecs[r][c] for r in range(len(vecs))] for c in cols]
        inv = _invert_matrix(square)
        self._sub_left_inverse = (tuple(cols), inv)

    def to_parent(self, x: "GroupElement") -> "GroupElement":
        self._same(x)
        if self.parent is None:
            return x
        s = self.log(x)
        w = [0] * self.parent.m
        for coef, vec in zip(s, self.basis.vectors):
            if _nonzero(coef):
                for a in range(self.parent.m):
                    if vec[a]:
                        w[a] = w[a] + coef * vec[a]
        return self.parent.exp(w)

    def from_parent(self, x: "GroupElement", tol: float = 1e-9) -> "GroupElement":
        if self.parent is None:
            return x
        w = self.parent.log(x)
        cols, inv = self._sub_left_inverse
        rhs = [w[c] for c in cols]
        s = [sum((inv[r][k] * rhs[k] for k in range(len(rhs))), Fraction(0)) for r in range(len(inv))]
        back = [sum((s[r] * self.basis.vectors[r][a] for r in range(len(s))), Fraction(0))
                for a in range(self.parent.m)]
        for a in range(self.parent.m):
            if not is_zero(back[a] - w[a], tol):
                raise ValueError("element does not lie in the subgroup")
        return self.exp(s)

    def to_root(self, x: "GroupElement") -> "GroupElement":
        g = self
        while g.parent is not None:
            x = g.to_parent(x)
            g = g.parent
        return x

    def root(self) -> "NilGroup":
        g = self
        while g.parent is not None:
            g = g.parent
        return g

    def from_root(self, x: "GroupElement") -> "GroupElement":
        chain = []
        g = self
        while g.parent is not None:
            chain.append(g)
            g = g.parent
        for sub in reversed(chain):
            x = sub.from_parent(x)
        return x


def _invert_matrix(mat):
    n = len(mat)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(mat)]
    red, piv = la.rref(aug)
    if piv[:n] != list(range(n)):
        raise ValueError("singular matrix")
    return [list(row[n:]) for row in red]


@dataclass(frozen=True, eq=False)
class GroupElement:
    psi: Tuple[Scalar, ...]
    group: NilGroup = field(repr=False)

    def __eq__(self, other):
        return isinstance(other, GroupElement) and other.psi == self.psi and other.group == self.group

    def __hash__(self):
        return hash(self.psi)

    def __mul__(self, other):
        return self.group.multiply(self, other)

    def inverse(self):
        return self.group.invert(self)

    @property
    def exact(self) -> bool:
        return all(is_exact(a) for a in self.psi)


# ------------------------------------------------------------ spec operations


def bch_product_first_kind(group: NilGroup, t, u) -> tuple:
    if len(t) != group.m or len(u) != group.m:
        raise ValueError("coordinate vectors must have length m")
    return group.tables.f_bch(tuple(normalize(a) for a in t), tuple(normalize(a) for a in u))


def coord_convert(group: NilGroup, x, direction: str) -> tuple:
    """'first->second' maps exponential coordinates to psi; 'second->first' is the inverse."""
    if not group.basis.nested:
        raise NestingError()
    x = tuple(normalize(a) for a in x)
    if direction in ("first->second", "first_to_second"):
        return group.tables.f_exp(x)
    if direction in ("second->first", "second_to_first"):
        return group.tables.f_log(x)
    raise ValueError(f"unknown direction {direction!r}")


def group_multiply(x: GroupElement, y: GroupElement) -> GroupElement:
    if x.group != y.group:
        raise BasisMismatchError("elements are expressed in different bases")
    return x.group.multiply(x, y)


def group_invert(x: GroupElement) -> GroupElement:
    return x.group.invert(x)


def commutator(x: GroupElement, y: GroupElement) -> GroupElement:
    """[x, y] = x y x^-1 y^-1."""
    if x.group != y.group:
        raise BasisMismatchError("elements are expressed in different bases")
    return x.group.commutator(x, y)


# ----------------------------------------------------------- Mal'cev bases


def _span_rows(rows):
    return la.rref(rows)[0] if rows else []


def _pivot_malcev(group: NilGroup, rows, cmax: int):
    """Lattice generators for exp(span(rows)), using ambient pivots.

    ``rows`` must span a subalgebra.  Returns (Y, c): Y[l] is the log of a
    lattice point whose first nonzero coordinate, at pivot p_l, equals c[l]
    and is minimal.  Every lattice point of the subgroup is then
    exp(n_1 Y_1) ... exp(n_r Y_r) with integer n.
    """
    red, piv = la.rref(rows)
    r = len(red)
    Ys: list = [None] * r
    cs: list = [None] * r

    def complete(x: GroupElement, idx: int):
        # coordinates before the next pivot are fixed from here on
        stop = piv[idx] if idx < r else group.m
        for a in range(stop):
            if not is_integer(x.psi[a]):
                return None
        if idx == r:
            return x
        Y, c = Ys[idx], cs[idx]
        b = x.psi[piv[idx]]
        start = math.ceil(b)
        for z in range(start, start + int(c)):
            s = (z - b) / c
            cand = group.multiply(x, group.exp([s * v for v in Y])) if s else x
            found = complete(cand, idx + 1)
            if found is not None:
                return found
        return None

    for l in range(r - 1, -1, -1):
        for c in range(1, cmax + 1):
            x = group.exp([c * v for v in red[l]])
            gamma = complete(x, l + 1)
            if gamma is not None:
                Ys[l] = tuple(group.log(gamma))
                cs[l] = Fraction(c)
                break
        else:
            raise RationalityError(f"no lattice point found in direction {l + 1} (search bound {cmax})", l)
    return Ys, cs


def _ext_gcd_combination(values: List[Fraction]):
    """Integers n with sum n_i v_i = gcd of the v_i (as a positive rational)."""
    den = 1
    for v in values:
        den = math.lcm(den, v.denominator)
    ints = [int(v * den) for v in values]
    g, coeffs = 0, [0] * len(ints)
    for i, a in enumerate(ints):
        if a == 0:
            continue
        if g == 0:
            g, coeffs = abs(a), [0] * len(ints)
            coeffs[i] = 1 if a > 0 else -1
            continue
        # extended Euclid on (g, a)
        old_r, r = g, a
        old_s, s = 1, 0
        old_t, t = 0, 1
        while r:
            q = old_r // r
            old_r, r = r, old_r - q * r
            old_s, s = s, old_s - q * s
            old_t, t = t, old_t - q * t
        if old_r < 0:
            old_r, old_s, old_t = -old_r, -old_s, -old_t
        coeffs = [old_s * x for x in coeffs]
        coeffs[i] += old_t
        g = old_r
    return Fraction(g, den), coeffs


def _malcev_from_levels(group: NilGroup, levels: List[list], cmax: int = 4096) -> MalcevBasis:
    m = group.m
    levels = [_span_rows([list(map(Fraction, v)) for v in lev]) for lev in levels]
    while levels and not levels[-1]:
        levels.pop()
    if not levels:
        raise ValueError("empty subgroup")
    h = levels[0]
    for i in range(1, len(levels)):
        for v in levels[i]:
            if not la.in_span(v, levels[i - 1]):
                raise FiltrationError(f"filtration level {i + 1} is not contained in level {i}")

    def level_rows(i):
        return levels[i - 1] if i - 1 < len(levels) else []

    for i in range(1, len(levels) + 1):
        for j in range(1, len(levels) + 1):
            target = level_rows(i + j)
            for v in level_rows(i):
                for w in level_rows(j):
                    b = group.bracket(v, w)
                    if any(b) and not la.in_span(b, target):
                        if i == 1 and j == 1 and not la.in_span(b, h):
                            raise BracketClosureError((i, j))
                        raise FiltrationError(f"[H_{i}, H_{j}] is not inside H_{i + j}")

    # flag refining the levels: H_{i+1} + (H_i ∩ W_p)
    flag = [h]
    for i in range(1, len(levels) + 1):
        red, piv = la.rref(level_rows(i))
        below = level_rows(i + 1)
        for p in range(m + 1):
            part = [row for row, q in zip(red, piv) if q >= p]
            cand = _span_rows(list(below) + part)
            if len(cand) < len(flag[-1]):
                flag.append(cand)
    if flag[-1]:
        flag.append([])
    dims = [len(v) for v in flag]
    if any(a - b != 1 for a, b in zip(dims, dims[1:])):
        raise FiltrationError("could not refine the filtration to a codimension-one flag")
    for l in range(1, len(flag)):
        for v in h:
            for w in flag[l - 1]:
                b = group.bracket(v, w)
                if any(b) and not la.in_span(b, flag[l]):
                    raise FiltrationError("flag is not normal; nesting property cannot hold")

    Y = []
    scales = []
    for l in range(1, len(flag)):
        upper, lower = flag[l - 1], flag[l]
        w = next(v for v in upper if not la.in_span(v, lower))
        gens, _ = _pivot_malcev(group, upper, cmax)
        vals = []
        for gvec in gens:
            coeffs = la.solve_in_basis(gvec, [w] + list(lower))
            vals.append(coeffs[0])
        c, combo = _ext_gcd_combination(vals)
        if c == 0:
            raise RationalityError(f"filtration subgroup is not rational at index {l}", l)
        gamma = group.identity()
        for gvec, n in zip(gens, combo):
            if n:
                gamma = group.multiply(gamma, group.power(group.exp(gvec), n))
        Y.append(tuple(Fraction(0) + a for a in group.log(gamma)))
        scales.append(c)

    sub_dims = [len(h)] + [len(level_rows(i)) for i in range(1, len(levels) + 1)]
    filt = Filtration(tuple(sub_dims))
    hgt = max((height(a) for v in Y for a in v), default=1)
    basis = MalcevBasis(tuple(Y), filt, hgt, True, tuple(scales))
    _verify_nesting(group, basis)
    return basis


def _verify_nesting(group: NilGroup, basis: MalcevBasis):
    vecs = basis.vectors
    for i in range(len(vecs)):
        later = list(vecs[i + 1:])
        for v in vecs:
            b = group.bracket(v, vecs[i])
            if any(b) and not la.in_span(b, later):
                raise NestingError(f"[h, Y_{i + 1}] leaves span(Y_{i + 2}, ...)")


def build_malcev_basis(group: NilGroup, weak, filt) -> MalcevBasis:
    """Mal'cev basis for the lattice of ``group`` from a weak basis.

    ``weak`` lists rational vectors (in the coordinates of ``group``'s basis)
    ordered so that the last ``filt[i]`` of them span the i-th level.
    """
    if not isinstance(filt, Filtration):
        filt = Filtration(tuple(filt))
    weak = [tuple(Fraction(a) for a in v) for v in weak]
    if len(weak) != filt.m:
        raise FiltrationError("weak basis size does not match the filtration")
    for v in weak:
        for a in v:
            if not is_exact(a):
                raise RationalityError("weak basis must be rational")
    levels = [weak[filt.first_index(i):] for i in range(1, filt.degree + 1)]
    for i, lev in enumerate(levels, start=1):
        if la.rank(lev) != len(lev):
            raise RationalityError(f"weak vectors of level {i} are dependent", i)
    return _malcev_from_levels(group, levels)


def subgroup_malcev_basis(group: NilGroup, generators, levels=None) -> MalcevBasis:
    """Mal'cev basis of G' = exp(span(generators)) for the lattice G' ∩ Γ.

    With ``levels=None`` the filtration is the induced one, G'_i = G' ∩ G_i.
    Otherwise ``levels[i-1]`` spans G'_i.
    """
    gens = [tuple(Fraction(a) for a in v) for v in generators]
    h, _ = la.rref(gens)
    for a, b in itertools.combinations(range(len(h)), 2):
        br = group.bracket(h[a], h[b])
        if any(br) and not la.in_span(br, h):
            raise BracketClosureError((a + 1, b + 1))
    if levels is None:
        red, piv = la.rref(h)
        levels = []
        for i in range(1, group.degree + 1):
            start = group.filtration.first_index(i)
            levels.append([row for row, p in zip(red, piv) if p >= start])
    return _malcev_from_levels(group, levels)


def subgroup(group: NilGroup, basis: MalcevBasis, name: str | None = None) -> NilGroup:
    """The subgroup exp(span(basis)) as a NilGroup in its own coordinates."""
    vecs = [list(v) for v in basis.vectors]
    n = len(vecs)
    entries = []
    for a in range(n):
        for b in range(a + 1, n):
            br = group.bracket(vecs[a], vecs[b])
            if not any(br):
                continue
            coeffs = la.solve_in_basis(br, vecs)
            if coeffs is None:
                raise BracketClosureError((a + 1, b + 1))
            for k, c in enumerate(coeffs):
                if c:
                    entries.append((a, b, k, c))
    alg = LieAlgebraData.from_entries(n, entries)
    return NilGroup(alg, basis.filtration, name=name or f"sub({group.name})", basis=basis, parent=group)


# ------------------------------------------------------------------ presets


def torus(m: int) -> NilGroup:
    if m < 1:
        raise ValueError("torus dimension must be positive")
    return NilGroup(LieAlgebraData.from_entries(m, []), Filtration((m, m)), name=f"torus:{m}")


def unitriangular_basis(n: int) -> List[Tuple[int, int]]:
    """Matrix units E_ab (a < b) ordered by superdiagonal, then by row."""
    return [(a, a + lev) for lev in range(1, n) for a in range(n - lev)]


def unitriangular(n: int, name: str | None = None) -> NilGroup:
    if n < 2:
        raise ValueError("ut:n needs n >= 2")
    units = unitriangular_basis(n)
    index = {u: i for i, u in enumerate(units)}
    entries = []
    for i, (a, b) in enumerate(units):
        for j, (c, d) in enumerate(units):
            if i >= j:
                continue
            # [E_ab, E_cd] = δ_bc E_ad − δ_da E_cb
            if b == c:
                entries.append((i, j, index[(a, d)], Fraction(1)))
            if d == a:
                entries.append((i, j, index[(c, b)], Fraction(-1)))
    m = len(units)
    dims = [m] + [sum(1 for (a, b) in units if b - a >= lev) for lev in range(1, n)]
    return NilGroup(LieAlgebraData.from_entries(m, entries), Filtration(tuple(dims)), name=name or f"ut:{n}")


def heisenberg() -> NilGroup:
    """Basis X1 = E12, X2 = E23, X3 = E13 with [X1, X2] = X3."""
    return unitriangular(3, name="heisenberg")


def preset(spec: str) -> NilGroup:
    spec = spec.strip().lower()
    if spec == "heisenberg":
        return heisenberg()
    kind, _, arg = spec.partition(":")
    try:
        n = int(arg)
    except ValueError:
        raise ValueError(f"unknown group preset {spec!r}") from None
    if kind == "torus":
        return torus(n)
    if kind == "ut":
        return unitriangular(n)
    raise ValueError(f"unknown group preset {spec!r}")


def direct_product(g1: NilGroup, g2: NilGroup) -> Tuple[NilGroup, List[int], List[int]]:
    """G1 x G2 with a basis ordered by filtration level.

    Returns the group and the positions of each factor's basis vectors.
    """
    f1, f2 = g1.filtration, g2.filtration
    order = sorted([(f1.level(i), 0, i) for i in range(g1.m)] + [(f2.level(i), 1, i) for i in range(g2.m)])
    pos = {(side, i): k for k, (_, side, i) in enumerate(order)}
    entries = []
    for side, g in ((0, g1), (1, g2)):
        for i, j, k, c in g.algebra.entries:
            entries.append((pos[(side, i)], pos[(side, j)], pos[(side, k)], c))
    m = g1.m + g2.m
    d = max(f1.degree, f2.degree)
    dims = [m] + [f1.dim(i) + f2.dim(i) for i in range(1, d + 1)]
    grp = NilGroup(LieAlgebraData.from_entries(m, entries), Filtration(tuple(dims)),
                   name=f"{g1.name}x{g2.name}")
    return grp, [pos[(0, i)] for i in range(g1.m)], [pos[(1, i)] for i in range(g2.m)]
