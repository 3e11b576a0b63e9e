"""Polynomial sequences Z^t -> G in the multibinomial basis.

A sequence is stored through its Taylor coefficients:
psi(g(n)) = sum_j t_j C(n, j), where C(n, j) = prod_i C(n_i, j_i).
Products, inverses, derivatives and dilations are computed pointwise and
refit by exact forward differences on an integer grid.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .lie_core import GroupElement, NilGroup
from .nilmanifold import HorizontalCharacter
from .scalar import (DEFAULT_TOL, Scalar, frac, height, is_exact, is_zero, norm_rz, normalize, slt)

Index = Tuple[int, ...]


class NotPolynomialError(ValueError):
    def __init__(self, detail: str = ""):
        super().__init__("not in poly(Z,G_•)" + (f": {detail}" if detail else ""))


def binom(n: int, j: int) -> int:
    """C(n, j) for any integer n (generalized binomial)."""
    if j < 0:
        return 0
    if n >= 0:
        return math.comb(n, j)
    num = 1
    for i in range(j):
        num *= n - i
    return num // math.factorial(j)


def multibinom(n: Sequence[int], j: Sequence[int]) -> int:
    out = 1
    for a, b in zip(n, j):
        out *= binom(a, b)
        if not out:
            break
    return out


def rational_binom(x: Fraction, j: int) -> Fraction:
    out = Fraction(1)
    for i in range(j):
        out *= (x - i)
    return out / math.factorial(j)


def multi_indices(t: int, d: int) -> List[Index]:
    """All j in N^t with |j| <= d, graded then lexicographic."""
    out = []
    for total in range(d + 1):
        for j in itertools.product(range(total + 1), repeat=t):
            if sum(j) == total:
                out.append(j)
    return out


def _as_index(n, t: int) -> Index:
    if isinstance(n, int):
        n = (n,)
    n = tuple(int(a) for a in n)
    if len(n) != t:
        raise ValueError(f"expected {t} parameters, got {len(n)}")
    return n


@dataclass(frozen=True)
class PolySeq:
    group: NilGroup
    t: int
    coeffs: Mapping[Index, Tuple[Scalar, ...]] = field(default_factory=dict)

    def __post_init__(self):
        clean: Dict[Index, Tuple[Scalar, ...]] = {}
        m = self.group.m
        f = self.group.filtration
        for j, vec in dict(self.coeffs).items():
            j = tuple(int(a) for a in j)
            if len(j) != self.t or any(a < 0 for a in j):
                raise ValueError(f"bad multi-index {j}")
            vec = tuple(normalize(a) for a in vec)
            if len(vec) != m:
                raise ValueError(f"coefficient {j} has length {len(vec)}, expected {m}")
            if not any(not is_zero(a, 0) for a in vec):
                continue
            deg = sum(j)
            if deg > 0:
                for a, v in enumerate(vec):
                    if not is_zero(v, 0) and not f.allowed(a, deg):
                        raise NotPolynomialError(
                            f"coefficient t_{j} has coordinate {a + 1} nonzero but G_{deg} starts at "
                            f"coordinate {f.first_index(deg) + 1}")
            clean[j] = vec
        object.__setattr__(self, "coeffs", dict(sorted(clean.items(), key=lambda kv: (sum(kv[0]), kv[0]))))

    # basic data -----------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(j) for j in self.coeffs), default=0)

    @property
    def exact(self) -> bool:
        return all(is_exact(a) for v in self.coeffs.values() for a in v)

    def coefficient(self, j) -> Tuple[Scalar, ...]:
        j = tuple(j)
        return self.coeffs.get(j, tuple(Fraction(0) for _ in range(self.group.m)))

    def psi(self, n) -> Tuple[Scalar, ...]:
        n = _as_index(n, self.t)
        out: list = [Fraction(0)] * self.group.m
        for j, vec in self.coeffs.items():
            b = multibinom(n, j)
            if b:
                for a, v in enumerate(vec):
                    if v:
                        out[a] = out[a] + b * v
        return tuple(out)

    def __call__(self, n) -> GroupElement:
        return GroupElement(self.psi(n), self.group)

    def coordinate(self, a: int) -> Dict[Index, Scalar]:
        return {j: v[a] for j, v in self.coeffs.items() if not is_zero(v[a], 0)}

    def is_identity(self, tol: float = 0.0) -> bool:
        return all(is_zero(a, tol) for v in self.coeffs.values() for a in v)

    def lands_in(self, i: int, tol: float = 0.0) -> bool:
        """Do all values lie in G_i?"""
        start = self.group.filtration.first_index(i)
        return all(is_zero(v[a], tol) for v in self.coeffs.values() for a in range(start))

    def equals(self, other: "PolySeq", tol: float = 0.0) -> bool:
        keys = set(self.coeffs) | set(other.coeffs)
        return all(is_zero(x - y, tol) for j in keys for x, y in zip(self.coefficient(j), other.coefficient(j)))


# ----------------------------------------------------------------- refitting


def _forward_differences(values: Dict[Index, list], t: int, D: int) -> Dict[Index, list]:
    """Turn samples on {0..D}^t into Taylor coefficients Δ^j f(0)."""
    table = {k: list(v) for k, v in values.items()}
    for axis in range(t):
        for level in range(1, D + 1):
            for idx in sorted(table, key=lambda k: -k[axis]):
                if idx[axis] < level:
                    continue
                prev = idx[:axis] + (idx[axis] - 1,) + idx[axis + 1:]
                table[idx] = [a - b for a, b in zip(table[idx], table[prev])]
    return table


def refit(group: NilGroup, t: int, fn: Callable[[Index], Sequence[Scalar]], D: int,
          tol: float = DEFAULT_TOL) -> PolySeq:
    """Interpolate a coordinate-polynomial map of degree <= D exactly."""
    grid = list(itertools.product(range(D + 1), repeat=t))
    values = {n: list(fn(n)) for n in grid}
    table = _forward_differences(values, t, D)
    scale = 1
    exact = all(is_exact(a) for v in values.values() for a in v)
    if not exact:
        scale = float(max([1] + [abs(float(a)) for v in values.values() for a in v]))
    coeffs = {}
    for j, vec in table.items():
        if sum(j) > D:
            continue
        if exact:
            coeffs[j] = tuple(vec)
        else:
            coeffs[j] = tuple(Fraction(0) if abs(float(a)) <= tol * scale else a for a in vec)
    return PolySeq(group, t, coeffs)


def from_function(group: NilGroup, t: int, fn: Callable[[Index], GroupElement], D: int) -> PolySeq:
    return refit(group, t, lambda n: fn(n).psi, D)


def _coord_degree(g: PolySeq) -> int:
    return max(1, g.degree)


def constant_sequence(x: GroupElement, t: int = 1) -> PolySeq:
    return PolySeq(x.group, t, {(0,) * t: x.psi})


def linear_sequence(a: GroupElement, x: GroupElement | None = None) -> PolySeq:
    """n -> a^n x."""
    g = a.group
    log_a = g.log(a)
    x = x or g.identity()
    D = g.tables.conv_degree * g.tables.mul_degree
    return refit(g, 1, lambda n: g.multiply(g.exp([n[0] * v for v in log_a]), x).psi, D)


def sequence_product(g1: PolySeq, g2: PolySeq) -> PolySeq:
    if g1.group != g2.group or g1.t != g2.t:
        raise ValueError("sequences live on different groups or parameter spaces")
    G = g1.group
    D = max(_coord_degree(g1), _coord_degree(g2)) * G.tables.mul_degree
    return refit(G, g1.t, lambda n: G.tables.f_mul(g1.psi(n), g2.psi(n)), D)


def sequence_inverse(g: PolySeq) -> PolySeq:
    G = g.group
    D = _coord_degree(g) * G.tables.inv_degree
    return refit(G, g.t, lambda n: G.tables.f_inv(g.psi(n)), D)


def derivative_sequence(g: PolySeq, h) -> PolySeq:
    """∂_h g(n) = g(n+h) g(n)^{-1}."""
    G = g.group
    h = _as_index(h, g.t)
    D = _coord_degree(g) * G.tables.mul_degree * G.tables.inv_degree

    def val(n):
        shifted = tuple(a + b for a, b in zip(n, h))
        return G.tables.f_mul(g.psi(shifted), G.tables.f_inv(g.psi(n)))

    return refit(G, g.t, val, D)


def nonlinear_part(g: PolySeq) -> PolySeq:
    """g(n) g(1)^{-n}; requires t = 1 and g(0) = id."""
    if g.t != 1:
        raise ValueError("nonlinear part is defined for one-parameter sequences")
    G = g.group
    if not all(is_zero(a) for a in g.psi((0,))):
        raise ValueError("nonlinear part needs g(0) = id")
    inv_a = G.log(G.invert(g((1,))))
    D = _coord_degree(g) * G.tables.mul_degree * G.tables.conv_degree

    def val(n):
        return G.tables.f_mul(g.psi(n), G.tables.f_exp(tuple(n[0] * v for v in inv_a)))

    out = refit(G, 1, val, D)
    if not out.lands_in(2, DEFAULT_TOL):
        raise NotPolynomialError("nonlinear part leaves G_2")
    return out


def dilate_sequence(g: PolySeq, a, b) -> PolySeq:
    """n -> g(a + b∘n)."""
    a = _as_index(a, g.t)
    b = _as_index(b, g.t)
    D = _coord_degree(g)
    return refit(g.group, g.t, lambda n: g.psi(tuple(x + y * z for x, y, z in zip(a, b, n))), D)


def map_sequence(g: PolySeq, target: NilGroup, fn: Callable[[GroupElement], GroupElement], D: int) -> PolySeq:
    """Refit n -> fn(g(n)) on another group."""
    return refit(target, g.t, lambda n: fn(g(n)).psi, D)


# ----------------------------------------------------------------- Host-Kra


@dataclass(frozen=True)
class HKVerdict:
    member: bool
    gammas: Tuple[GroupElement, ...]
    failing_face: Optional[int] = None  # vertex code of the face's minimal vertex

    def __bool__(self):
        return self.member


def _in_level(x: GroupElement, i: int, tol: float) -> bool:
    start = x.group.filtration.first_index(i)
    return all(is_zero(a, tol) for a in x.psi[:start])


def hk_factorize(point: Sequence[GroupElement], k: int, kmax: int = 4, tol: float = 0.0) -> HKVerdict:
    """Peel upper-face components off a point of G^{2^k}.

    Vertex w (bit i = ω_i) gets x_w = γ_w γ_{w'} ... over subsets w' of w in
    decreasing order.  Membership holds iff every γ_w lies in G_{|w|}.
    """
    if k > kmax:
        raise ValueError(f"cube dimension {k} exceeds the configured maximum {kmax}")
    if len(point) != 2 ** k:
        raise ValueError(f"need {2 ** k} vertices, got {len(point)}")
    G = point[0].group
    gammas: Dict[int, GroupElement] = {}
    failing = None
    for w in range(2 ** k):
        rest = G.identity()
        subs = [s for s in range(w - 1, -1, -1) if s & w == s]
        for s in subs:
            rest = G.multiply(rest, gammas[s])
        gam = G.multiply(point[w], G.invert(rest))
        gammas[w] = gam
        if failing is None and not _in_level(gam, bin(w).count("1"), tol):
            failing = w
    ordered = tuple(gammas[w] for w in range(2 ** k))
    return HKVerdict(failing is None, ordered, failing)


@dataclass(frozen=True)
class MembershipResult:
    ok: bool
    samples: int
    failure: Optional[dict] = None

    def __bool__(self):
        return self.ok


def polynomial_membership_test(g, kmax: int = 3, samples: int = 100, seed: int = 0, *,
                               t: int | None = None, spread: int = 50, tol: float = 0.0) -> MembershipResult:
    """Sample parallelepipeds (x + ω·h) and check Host-Kra membership of their images."""
    rng = random.Random(seed)
    if isinstance(g, PolySeq):
        t = g.t
        ev = g
        if not g.exact and tol == 0.0:
            tol = 1e-9
    else:
        ev = g
        t = t or 1
    count = 0
    for k in range(1, kmax + 1):
        for _ in range(samples):
            x = [rng.randint(-spread, spread) for _ in range(t)]
            hs = [[rng.randint(-spread, spread) for _ in range(t)] for _ in range(k)]
            verts = []
            for w in range(2 ** k):
                n = list(x)
                for i in range(k):
                    if w >> i & 1:
                        n = [a + b for a, b in zip(n, hs[i])]
                verts.append(ev(tuple(n)) if t > 1 else ev((n[0],)) if isinstance(ev, PolySeq) else ev(n[0]))
            verdict = hk_factorize(verts, k, max(kmax, k), tol)
            count += 1
            if not verdict.member:
                return MembershipResult(False, count, {"k": k, "x": x, "h": hs, "face": verdict.failing_face})
    return MembershipResult(True, count)


# ------------------------------------------------------------ torus polynomials


@dataclass(frozen=True)
class TorusPoly:
    """p(n) = sum_j α_j C(n, j) mod 1, coefficients stored in [0, 1)."""

    t: int
    coeffs: Mapping[Index, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for j, a in dict(self.coeffs).items():
            j = tuple(int(x) for x in j)
            if len(j) != self.t:
                raise ValueError(f"bad multi-index {j}")
            a = frac(normalize(a))
            if not is_zero(a, 0):
                clean[j] = a
        object.__setattr__(self, "coeffs", dict(sorted(clean.items(), key=lambda kv: (sum(kv[0]), kv[0]))))

    @property
    def degree(self) -> int:
        return max((sum(j) for j in self.coeffs), default=0)

    def coefficient(self, j) -> Scalar:
        return self.coeffs.get(tuple(j), Fraction(0))

    def __call__(self, n) -> Scalar:
        n = _as_index(n, self.t)
        return frac(sum((a * multibinom(n, j) for j, a in self.coeffs.items()), Fraction(0)))

    def scale(self, q: int) -> "TorusPoly":
        return TorusPoly(self.t, {j: q * a for j, a in self.coeffs.items()})

    def __add__(self, other: "TorusPoly") -> "TorusPoly":
        keys = set(self.coeffs) | set(other.coeffs)
        return TorusPoly(self.t, {j: self.coefficient(j) + other.coefficient(j) for j in keys})

    def __neg__(self):
        return self.scale(-1)


def compose_character(eta: HorizontalCharacter, g: PolySeq) -> TorusPoly:
    if eta.group != g.group:
        raise ValueError("character and sequence live on different groups")
    out = {}
    for j, vec in g.coeffs.items():
        out[j] = sum((k * v for k, v in zip(eta.k, vec) if k), Fraction(0))
    return TorusPoly(g.t, out)


def _sizes(N, t: int) -> Tuple[int, ...]:
    if isinstance(N, int):
        N = (N,) * t
    N = tuple(int(x) for x in N)
    if len(N) != t or any(x < 1 for x in N):
        raise ValueError("N must be positive, one entry per parameter")
    return N


def _plain_norm(p: TorusPoly, N) -> Scalar:
    best = Fraction(0)
    for j, a in p.coeffs.items():
        if sum(j) == 0:
            continue
        w = 1
        for Ni, ji in zip(N, j):
            w *= Ni ** ji
        v = w * norm_rz(a)
        if slt(best, v):
            best = v
    return best


def smoothness_norm(p: TorusPoly, N, Q: int | None = None) -> Tuple[Scalar, int]:
    """‖p‖_{C∞[N]}; with Q, the minimum of ‖qp‖ over 1 <= q <= Q and its q."""
    N = _sizes(N, p.t)
    if Q is None:
        return _plain_norm(p, N), 1
    if Q < 1:
        raise ValueError("Q must be at least 1")
    best, best_q = None, 1
    for q in range(1, Q + 1):
        v = _plain_norm(p.scale(q), N)
        if best is None or slt(v, best):
            best, best_q = v, q
            if v == 0:
                break
    return best, best_q


# --------------------------------------------------------------- extrapolation


def _coerce_rational(x) -> Fraction:
    x = normalize(x)
    if not is_exact(x):
        raise ValueError("extrapolation needs rational a and b")
    return x


def rebasing_coefficients(a, b, jmax: int) -> Dict[Tuple[int, int], Fraction]:
    """c(a,b,j',j) with C((n-a)/b, j) = sum_{j'<=j} c(a,b,j',j) C(n,j')."""
    a, b = _coerce_rational(a), _coerce_rational(b)
    if b == 0:
        raise ValueError("b must be nonzero")
    out = {}
    for j in range(jmax + 1):
        vals = [rational_binom((Fraction(n) - a) / b, j) for n in range(j + 1)]
        for jp in range(j + 1):
            # forward differences give binomial-basis coefficients
            out[(jp, j)] = vals[0]
            vals = [y - x for x, y in zip(vals, vals[1:])]
    return {k: v for k, v in out.items()}


def multi_rebasing_coefficients(a, b, d: int) -> Dict[Tuple[Index, Index], Fraction]:
    """Multiparameter c(a,b,j',j): products of one-parameter coefficients."""
    t = len(a)
    singles = [rebasing_coefficients(a[i], b[i], d) for i in range(t)]
    out = {}
    for j in multi_indices(t, d):
        for jp in itertools.product(*[range(x + 1) for x in j]):
            c = Fraction(1)
            for i in range(t):
                c *= singles[i][(jp[i], j[i])]
                if not c:
                    break
            if c:
                out[(tuple(jp), j)] = c
    return out


def forward_rebasing(a, b, d: int) -> Dict[Tuple[Index, Index], Fraction]:
    """e with C(a + b∘n, j) = sum_{j'} e(j', j) C(n, j') (multiparameter)."""
    t = len(a)
    singles = []
    for i in range(t):
        ai, bi = _coerce_rational(a[i]), _coerce_rational(b[i])
        tab = {}
        for j in range(d + 1):
            vals = [rational_binom(ai + bi * n, j) for n in range(j + 1)]
            for jp in range(j + 1):
                tab[(jp, j)] = vals[0]
                vals = [y - x for x, y in zip(vals, vals[1:])]
        singles.append(tab)
    out = {}
    for j in multi_indices(t, d):
        for jp in itertools.product(*[range(x + 1) for x in j]):
            c = Fraction(1)
            for i in range(t):
                c *= singles[i][(jp[i], j[i])]
            if c:
                out[(tuple(jp), j)] = c
    return out


@dataclass(frozen=True)
class ExtrapolationResult:
    q: int
    bound: Scalar
    constant: Scalar
    tilde_norm: Scalar
    actual: Scalar
    coefficients: Mapping[Tuple[Index, Index], Fraction]
    tilde: TorusPoly


def extrapolate_norm(p: TorusPoly, a, b, N, Q: int) -> ExtrapolationResult:
    """Bound ‖qp‖_{C∞[N]} by a computed multiple of ‖p̃‖_{C∞[N]}, p̃(n) = p(a + b∘n).

    The coefficients of p are used as real lifts when a or b is not integral.
    """
    t = p.t
    a = tuple(_coerce_rational(x) for x in (a if isinstance(a, (list, tuple)) else (a,)))
    b = tuple(_coerce_rational(x) for x in (b if isinstance(b, (list, tuple)) else (b,)))
    if len(a) != t or len(b) != t:
        raise ValueError("a and b need one entry per parameter")
    for x in a + b:
        if height(x) > Q:
            raise ValueError(f"height of {x} exceeds Q={Q}")
    if any(x == 0 for x in b):
        raise ValueError("b must be nonzero")
    N = _sizes(N, t)
    d = max(p.degree, 0)
    fwd = forward_rebasing(a, b, d)
    tilde = {}
    for (jp, j), e in fwd.items():
        tilde[jp] = tilde.get(jp, Fraction(0)) + e * p.coefficient(j)
    ptilde = TorusPoly(t, tilde)
    coeffs = multi_rebasing_coefficients(a, b, d)
    q = 1
    for c in coeffs.values():
        q = math.lcm(q, c.denominator)
    constant = Fraction(0)
    for j in multi_indices(t, d):
        if sum(j) == 0:
            continue
        s = Fraction(0)
        for (jp, jj), c in coeffs.items():
            if jp != j or sum(jj) == 0:
                continue
            w = Fraction(1)
            for Ni, x, y in zip(N, j, jj):
                w *= Fraction(Ni) ** (x - y)
            s += abs(q * c) * w
        constant = max(constant, s)
    tnorm, _ = smoothness_norm(ptilde, N)
    actual, _ = smoothness_norm(p.scale(q), N)
    return ExtrapolationResult(q, constant * tnorm, constant, tnorm, actual, coeffs, ptilde)
