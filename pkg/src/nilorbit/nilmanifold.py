"""The quotient G/Γ: fundamental domain, metric bounds, rational points, characters."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .lie_core import GroupElement, NilGroup
from .poly import Poly
from .scalar import DEFAULT_TOL, Scalar, floor, frac, is_exact, lcm_denominators, nearest_int, slt, smax, smin


class CharacterError(ValueError):
    pass


@dataclass(frozen=True)
class Nilmanifold:
    group: NilGroup

    @property
    def height(self) -> int:
        return self.group.basis.height

    def lattice_spot_check(self, samples: int = 20, seed: int = 0) -> bool:
        import random

        rng = random.Random(seed)
        g = self.group
        for _ in range(samples):
            x = g.element([rng.randint(-5, 5) for _ in range(g.m)])
            y = g.element([rng.randint(-5, 5) for _ in range(g.m)])
            if not (g.is_lattice(g.multiply(x, y)) and g.is_lattice(g.invert(x))):
                return False
        return True


@dataclass(frozen=True)
class Reduction:
    frac: GroupElement
    lat: GroupElement
    boundary_ambiguous: bool = False

    def __iter__(self):
        return iter((self.frac, self.lat))


def reduce_fundamental(x: GroupElement, tol: float = DEFAULT_TOL) -> Reduction:
    """Write x = {x}[x] with psi({x}) in [0,1)^m and [x] in Γ.

    Coordinates are fixed left to right by right multiplication with
    exp(n X_i), which only disturbs later coordinates.
    """
    g = x.group
    y = x
    ambiguous = False
    for i in range(g.m):
        v = y.psi[i]
        n = floor(v)
        if not is_exact(v):
            r = v - n
            if r < tol:
                ambiguous = True
            elif 1 - r < tol:
                ambiguous = True
        if n:
            y = g.multiply(y, g.generator(i, -n))
    lat = g.multiply(g.invert(y), x)
    if not lat.exact:
        lat = g.element([nearest_int(a) for a in lat.psi])
    return Reduction(y, lat, ambiguous)


def _sup(psi) -> Scalar:
    return smax(abs(a) for a in psi)


def _one_hop(g: NilGroup, x: GroupElement, y: GroupElement) -> Scalar:
    a = _sup(g.multiply(x, g.invert(y)).psi)
    b = _sup(g.multiply(y, g.invert(x)).psi)
    return smin((a, b))


def metric_estimate(x: GroupElement, y: GroupElement, refine: int = 0) -> Scalar:
    """Upper bound on d(x, y).

    ``refine`` > 0 also tries paths through waypoints: the one-parameter
    path from y to x cut into k hops (k <= refine + 1), and for refine >= 2 a
    small grid of single waypoints around the midpoint.
    """
    g = x.group
    if y.group != g:
        raise ValueError("elements live in different groups")
    best = _one_hop(g, x, y)
    if refine <= 0 or best == 0:
        return best
    w = g.multiply(x, g.invert(y))
    v = g.log(w)
    for k in range(2, refine + 2):
        step = g.exp([a / k for a in v])
        best = smin((best, k * _sup(step.psi)))
    if refine >= 2:
        # waypoints z: cost d(x, z) + d(z, y) by one-hop bounds
        grid = [Fraction(i, 4) for i in range(-4, 5)]
        scale = smax((best, Fraction(1, 10**6)))
        for offs in itertools.product(grid, repeat=g.m):
            z = g.multiply(g.element([scale * o for o in offs]), y)
            cost = _one_hop(g, x, z) + _one_hop(g, z, y)
            if slt(cost, best):
                best = cost
    return best


def quotient_metric_estimate(x: GroupElement, y: GroupElement, radius: int = 3) -> Scalar:
    """Upper bound on d(xΓ, yΓ) from lattice translates with |psi(γ)| <= radius."""
    if radius < 1:
        raise ValueError("radius must be at least 1")
    g = x.group
    best = None
    rng = range(-radius, radius + 1)
    for gamma in itertools.product(rng, repeat=g.m):
        cand = _one_hop(g, x, g.multiply(y, g.element(gamma)))
        if best is None or slt(cand, best):
            best = cand
    return best


@dataclass(frozen=True)
class RationalVerdict:
    kind: str  # "rational", "irrational" or "unknown"
    r: Optional[int] = None
    denominator: Optional[int] = None


def rational_point_check(x: GroupElement, Q: int = 10**4, tol: float = DEFAULT_TOL) -> RationalVerdict:
    """Smallest r <= Q with x^r in Γ.

    Exact coordinates are always rational; if no r <= Q works the verdict is
    still "rational" with r=None.  Approximate coordinates give "unknown"
    when some power lands within ``tol`` of Γ and "irrational" (meaning: not
    Q-rational at this precision) otherwise.
    """
    g = x.group
    den = None
    if x.exact:
        den = lcm_denominators(x.psi)
    p = g.identity()
    for r in range(1, Q + 1):
        p = g.multiply(p, x)
        if g.is_lattice(p, tol):
            if x.exact:
                return RationalVerdict("rational", r, den)
            return RationalVerdict("unknown", r)
    if x.exact:
        return RationalVerdict("rational", None, den)
    return RationalVerdict("irrational")


@dataclass(frozen=True)
class HorizontalCharacter:
    group: NilGroup
    k: Tuple[int, ...]

    def __post_init__(self):
        k = tuple(int(a) for a in self.k)
        object.__setattr__(self, "k", k)
        if len(k) != self.group.m:
            raise CharacterError(f"frequency has length {len(k)}, expected {self.group.m}")
        if not annihilates_commutators(self.group, k):
            raise CharacterError(f"k={k} does not annihilate [G,G]")

    @property
    def modulus(self) -> int:
        return max((abs(a) for a in self.k), default=0)

    def is_trivial(self) -> bool:
        return not any(self.k)

    def lift(self, x: GroupElement) -> Scalar:
        """k . psi(x) as a real number (no reduction mod 1)."""
        return sum((a * b for a, b in zip(self.k, x.psi) if a), Fraction(0))

    def __call__(self, x: GroupElement) -> Scalar:
        return frac(self.lift(x))


def annihilates_commutators(group: NilGroup, k: Sequence[int]) -> bool:
    """True iff x -> k.psi(x) is a homomorphism: sum k_i P_i vanishes identically."""
    total = Poly(2 * group.m)
    for a, P in zip(k, group.tables.corrections):
        if a:
            total = total + P * a
    return total.is_zero()


def horizontal_lattice(group: NilGroup):
    """Integer basis description of the valid frequencies.

    Returns (coords, aligned): the coordinates a frequency may use, and
    whether every integer vector supported there is valid.
    """
    m = group.m
    corr = group.tables.corrections
    coords = [i for i in range(m) if corr[i].is_zero()]
    # a coordinate whose correction is nonzero can only appear in combinations
    aligned = True
    bad = [i for i in range(m) if not corr[i].is_zero()]
    if bad:
        from . import _linalg as la

        # monomial-coefficient matrix of the corrections
        monos = sorted({mono for i in bad for mono in corr[i].terms})
        rows = [[corr[i].terms.get(mono, Fraction(0)) for i in range(m)] for mono in monos]
        ns = la.nullspace(rows, m)
        extra = sorted({i for v in ns for i in range(m) if v[i] != 0} - set(coords))
        if extra:
            aligned = False
            coords = sorted(set(coords) | set(extra))
    return coords, aligned


def eval_horizontal_character(eta: HorizontalCharacter, x: GroupElement) -> Scalar:
    if x.group != eta.group:
        raise ValueError("character and element live in different groups")
    return eta(x)


@dataclass(frozen=True)
class VerticalCharacter:
    group: NilGroup
    k: Tuple[int, ...]

    def __post_init__(self):
        k = tuple(int(a) for a in self.k)
        object.__setattr__(self, "k", k)
        md = self.group.filtration.dim(self.group.degree)
        if len(k) != md:
            raise CharacterError(f"vertical frequency has length {len(k)}, expected {md}")

    @property
    def magnitude(self) -> int:
        return max((abs(a) for a in self.k), default=0)

    def __call__(self, x: GroupElement, tol: float = DEFAULT_TOL) -> Scalar:
        g = self.group
        start = g.filtration.first_index(g.degree)
        for a in x.psi[:start]:
            if not (a == 0 if is_exact(a) else abs(a) <= tol):
                raise CharacterError("vertical characters are defined on G_d only")
        return frac(sum((a * b for a, b in zip(self.k, x.psi[start:])), Fraction(0)))
