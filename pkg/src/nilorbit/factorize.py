"""Factorization g = ε g' γ of polynomial sequences and the relative square."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import _linalg as la
from .equidist import Certificate, certify_equidistribution, certify_total_equidistribution
from .lie_core import (Filtration, GroupElement, LieAlgebraData, MalcevBasis, NilGroup, _malcev_from_levels, direct_product,
                       subgroup, subgroup_malcev_basis)
from .nilmanifold import HorizontalCharacter, reduce_fundamental
from .polyseq import (NotPolynomialError, PolySeq, compose_character, constant_sequence, extrapolate_norm,
                      polynomial_membership_test, refit, sequence_inverse, sequence_product,
                      smoothness_norm)
from .scalar import (DEFAULT_TOL, Scalar, best_rational, is_exact, is_zero, nearest_int, smax)


class RationalizationOverflow(ValueError):
    def __init__(self, j, den):
        super().__init__(f"rationalization overflow at coefficient {j}: denominator {den}")
        self.j = j


class FactorizationInvariantError(RuntimeError):
    pass


# ------------------------------------------------------------------ kernels


def kernel_subgroup(eta: HorizontalCharacter) -> MalcevBasis:
    """Mal'cev basis for the identity component of ker η, in η's group coordinates."""
    if eta.is_trivial():
        raise ValueError("kernel of the trivial character is the whole group")
    m = eta.group.m
    gens = la.nullspace([[Fraction(a) for a in eta.k]], m)
    if not gens:
        return MalcevBasis((), Filtration((0, 0)))
    return subgroup_malcev_basis(eta.group, gens)


def kernel_group(eta: HorizontalCharacter) -> NilGroup:
    basis = kernel_subgroup(eta)
    name = f"ker{list(eta.k)}"
    if not basis.vectors:
        return NilGroup(LieAlgebraData.from_entries(0, []), basis.filtration, name=name, basis=basis,
                        parent=eta.group)
    return subgroup(eta.group, basis, name=name)


def root_vectors(group: NilGroup) -> List[Tuple[Fraction, ...]]:
    """Basis of a nested subgroup written in the root group's coordinates."""
    vecs = [tuple(Fraction(int(i == j)) for j in range(group.m)) for i in range(group.m)]
    g = group
    while g.parent is not None:
        pv = g.basis.vectors
        vecs = [tuple(sum((v[r] * pv[r][a] for r in range(len(pv))), Fraction(0)) for a in range(g.parent.m))
                for v in vecs]
        g = g.parent
    return vecs


def _lift_to(seq: PolySeq, target: NilGroup) -> PolySeq:
    """Re-express a sequence on a nested subgroup in the coordinates of ``target``."""
    if seq.group == target:
        return seq
    chain = []
    g = seq.group
    while g != target:
        if g.parent is None:
            raise ValueError("target is not an ancestor of the sequence's group")
        chain.append(g)
        g = g.parent
    D = max(1, seq.degree)
    for sub in chain:
        D *= sub.tables.conv_degree * sub.parent.tables.conv_degree

    def val(n):
        x = seq(n)
        for sub in chain:
            x = sub.to_parent(x)
        return x.psi

    return refit(target, seq.t, val, D)


def _restrict_to(seq: PolySeq, sub: NilGroup) -> PolySeq:
    D = max(1, seq.degree) * sub.tables.conv_degree * sub.parent.tables.conv_degree
    return refit(sub, seq.t, lambda n: sub.from_parent(seq(n)).psi, D)


# ------------------------------------------------------------------ splitting


@dataclass(frozen=True)
class Split:
    epsilon: PolySeq
    g_prime: PolySeq
    gamma: PolySeq
    eta: HorizontalCharacter
    pivots: Dict[Tuple[int, ...], int]


def _prefactor(g: PolySeq) -> Tuple[GroupElement, GroupElement, PolySeq]:
    """g = {g(0)} g̃ [g(0)] with g̃(0) = id."""
    red = reduce_fundamental(g((0,) * g.t))
    G = g.group
    left, right = G.invert(red.frac), G.invert(red.lat)
    D = max(1, g.degree) * G.tables.mul_degree ** 2
    tilde = refit(G, g.t, lambda n: G.multiply(G.multiply(left, g(n)), right).psi, D)
    return red.frac, red.lat, tilde


def _rationalize(x: Scalar, bound: int, tol: float) -> Fraction:
    """x itself when it is a rational of denominator <= bound (to working precision), else 0."""
    if is_exact(x):
        return x if x.denominator <= bound else Fraction(0)
    r = best_rational(x, bound)
    return r if abs(x - r) <= tol else Fraction(0)


def split_sequence(g: PolySeq, eta: HorizontalCharacter, N=None, M: int = 1 << 20,
                   den_bound: int | None = None, tol: float = DEFAULT_TOL) -> Split:
    """Split g = ε g' γ with η∘g' ≡ 0, ε carrying the fractional drift of η∘g.

    For each j ≠ 0 only the coordinate i* = argmax |k_i| (among coordinates
    g may use at degree |j|) is moved: u_j = t_j − e_{i*} r_j / k_{i*} with
    r_j = k·t_j − round(k·t_j).  v_j keeps the coordinates of u_j that are
    rationals of denominator <= M and then fixes i* so that k·v_j = k·u_j.
    """
    G = g.group
    if eta.group != G:
        raise ValueError("character and sequence live on different groups")
    if eta.is_trivial():
        raise ValueError("cannot split along the trivial character")
    x0 = g((0,) * g.t)
    if not all(is_zero(a, tol) for a in x0.psi):
        frac_part, lat_part, tilde = _prefactor(g)
        inner = split_sequence(tilde, eta, N, M, den_bound, tol)
        eps = sequence_product(constant_sequence(frac_part, g.t), inner.epsilon)
        gam = sequence_product(inner.gamma, constant_sequence(lat_part, g.t))
        return Split(eps, inner.g_prime, gam, eta, inner.pivots)
    den_bound = den_bound or M * max(1, eta.modulus)
    k = eta.k
    f = G.filtration
    eps_c, gam_c, pivots = {}, {}, {}
    for j, t_j in g.coeffs.items():
        if sum(j) == 0:
            continue
        deg = sum(j)
        s = sum((a * b for a, b in zip(k, t_j) if a), Fraction(0))
        rnd = nearest_int(s)
        r = s - rnd
        cand = [a for a in range(G.m) if k[a] and f.allowed(a, deg)]
        u = list(t_j)
        istar = None
        if cand:
            istar = max(cand, key=lambda a: (abs(k[a]), -a))
            pivots[j] = istar
            if not is_zero(r, 0):
                u[istar] = t_j[istar] - r / k[istar]
        elif not is_zero(r, tol):
            raise ValueError(f"no coordinate available to absorb coefficient {j}")
        v = [_rationalize(x, M, tol) for x in u]
        if istar is not None:
            rest = sum((k[a] * v[a] for a in range(G.m) if a != istar and k[a]), Fraction(0))
            v[istar] = (Fraction(rnd) - rest) / k[istar]
        for a, x in enumerate(v):
            if Fraction(x).denominator > den_bound:
                raise RationalizationOverflow(j, Fraction(x).denominator)
            if not is_zero(x, 0) and not f.allowed(a, deg):
                v[a] = Fraction(0)
        eps_c[j] = tuple(ti - ui for ti, ui in zip(t_j, u))
        gam_c[j] = tuple(v)
    eps = PolySeq(G, g.t, eps_c)
    gam = PolySeq(G, g.t, gam_c)
    gp = sequence_product(sequence_inverse(eps), sequence_product(g, sequence_inverse(gam)))
    # η is a homomorphism to R, so k·ψ(g'(n)) = sum_j (k·u_j − k·v_j) C(n, j) = 0
    for j, vec in gp.coeffs.items():
        lift = sum((a * b for a, b in zip(k, vec) if a), Fraction(0))
        if not is_zero(lift, tol * 1e3 if not gp.exact else 0):
            raise FactorizationInvariantError(f"η∘g' has nonzero coefficient at {j}: {lift}")
    return Split(eps, gp, gam, eta, pivots)


# ------------------------------------------------------------------ periods


@dataclass(frozen=True)
class PeriodCertificate:
    q: int
    certificate: Tuple[Tuple[Tuple[int, ...], Tuple[Fraction, ...]], ...]
    sample_checked: int


def _is_integral(vec) -> bool:
    return all(Fraction(a).denominator == 1 for a in vec)


def period_of_rational_sequence(gamma: PolySeq, Q: int, samples: int = 16) -> Optional[PeriodCertificate]:
    """Smallest q <= Q with γ(n+q)Γ = γ(n)Γ for every n.

    Certified by δ_q(n) = γ(n)^{-1} γ(n+q) having integral binomial
    coefficients, so δ_q takes values in Γ everywhere.
    """
    if not gamma.exact:
        raise ValueError("period search needs exact rational coefficients")
    if gamma.t != 1:
        raise ValueError("periods are computed for one-parameter sequences")
    G = gamma.group
    D = max(1, gamma.degree) * G.tables.mul_degree * G.tables.inv_degree
    pts = [gamma.psi((n,)) for n in range(D + 1)]
    inv = [G.tables.f_inv(p) for p in pts]
    for q in range(1, Q + 1):
        ok = True
        for n in range(D + 1):
            nq = pts[n + q] if n + q <= D else gamma.psi((n + q,))
            if not _is_integral(G.tables.f_mul(inv[n], nq)):
                ok = False
                break
        if not ok:
            continue
        delta = refit(G, 1, lambda n: G.tables.f_mul(G.tables.f_inv(gamma.psi(n)), gamma.psi((n[0] + q,))), D)
        if not all(_is_integral(v) for v in delta.coeffs.values()):
            continue
        checked = 0
        for n in range(-samples // 2, samples // 2):
            a = reduce_fundamental(gamma((n,))).frac
            b = reduce_fundamental(gamma((n + q,))).frac
            if a.psi != b.psi:
                raise FactorizationInvariantError(f"period certificate for q={q} contradicted at n={n}")
            checked += 1
        return PeriodCertificate(q, tuple(delta.coeffs.items()), checked)
    return None


# ------------------------------------------------------------------ full loop


@dataclass(frozen=True)
class Step:
    eta: HorizontalCharacter
    M: int
    certificate: Certificate
    sigma: Scalar
    group_dim: int


@dataclass(frozen=True)
class SmoothnessReport:
    N: int
    max_abs: Scalar
    max_increment: Scalar
    M: int

    @property
    def ok(self) -> bool:
        return self.max_abs <= self.M and self.max_increment * self.N <= self.M


@dataclass(frozen=True)
class FactorizationResult:
    epsilon: PolySeq
    g_prime: PolySeq
    gamma: PolySeq
    subgroup: NilGroup
    M: int
    N: int
    steps: Tuple[Step, ...]
    final: Optional[Certificate]
    smoothness: SmoothnessReport
    period: Optional[PeriodCertificate]

    @property
    def iterations(self) -> int:
        return len(self.steps)

    @property
    def subgroup_basis(self) -> List[Tuple[Fraction, ...]]:
        return root_vectors(self.subgroup)

    def reconstruct(self, n) -> GroupElement:
        G = self.epsilon.group
        mid = self.subgroup.to_root(self.g_prime(n))
        return G.multiply(G.multiply(self.epsilon(n), mid), self.gamma(n))


def smoothness_report(eps: PolySeq, N: int, M: int) -> SmoothnessReport:
    """Exact sup of |ψ(ε(n))| and of the coordinate increments over n in [N]."""
    prev = eps.psi((0,))
    max_abs = smax(abs(a) for a in prev)
    max_inc = Fraction(0)
    if eps.coeffs and any(sum(j) > 0 for j in eps.coeffs):
        for n in range(1, N + 1):
            cur = eps.psi((n,))
            max_abs = smax([max_abs] + [abs(a) for a in cur])
            max_inc = smax([max_inc] + [abs(a - b) for a, b in zip(cur, prev)])
            prev = cur
    return SmoothnessReport(N, max_abs, max_inc, M)


def _choose_character(cur: PolySeq, cert: Certificate, N: int, K: int) -> Tuple[HorizontalCharacter, Scalar]:
    """Turn an obstruction into a character on [N] with small ‖η∘g‖_{C∞[N]}."""
    eta = cert.eta
    r, q, L = cert.progression or (0, 1, N)
    base = 1
    if (r, q) != (0, 1):
        p = compose_character(eta, cur)
        base = extrapolate_norm(p, r, q, N, max(q, r, 1)).q
    k0 = tuple(base * a for a in eta.k)
    p = compose_character(HorizontalCharacter(cur.group, k0), cur)
    value, mult = smoothness_norm(p, N, K)
    return HorizontalCharacter(cur.group, tuple(mult * a for a in k0)), value


def factorize_full(g: PolySeq, N: int, M0: int = 4, A: float = 2, K: int | None = None, q_max: int = 20,
                   K_max: int = 8) -> FactorizationResult:
    """Iterate certify / split / descend until the remaining sequence is equidistributed.

    Each round looks for an obstruction on [N] first and otherwise certifies total equidistribution at δ = M^{-A} with characters
    |η| <= min(M, K_max) and progressions of step q <= min(q_max, 1/δ).  The
    complexity M is multiplied by max(|η|, denominator of γ_i, ceil(e σ_i))
    where σ_i is the obstruction's smoothness value.
    """
    if M0 < 2:
        raise ValueError("M0 must be at least 2")
    if g.t != 1:
        raise ValueError("factorize_full handles one-parameter sequences")
    G = g.group
    m = G.m
    frac_part, lat_part, cur = _prefactor(g)
    eps_total = constant_sequence(frac_part)
    gam_total = constant_sequence(lat_part)
    M = M0
    steps: List[Step] = []
    final = None
    while True:
        H = cur.group
        if H.m == 0:
            break
        delta = float(M) ** (-A)
        Kc = K or min(M, K_max)
        qm = max(1, min(q_max, int(math.floor(1 / delta))))
        # an obstruction on all of [N] needs no extrapolation, so look there first
        cert = certify_equidistribution(cur, N, delta, Kc)
        if cert.equidistributed:
            cert = certify_total_equidistribution(cur, N, delta, Kc, qm).certificate
        if cert.equidistributed:
            final = cert
            break
        if len(steps) >= m:
            raise FactorizationInvariantError(
                f"more than dim G = {m} iterations; last obstruction {cert.eta.k} on {cert.progression}")
        eta, sigma = _choose_character(cur, cert, N, Kc)
        sp = split_sequence(cur, eta, N, M)
        sub = kernel_group(eta)
        nxt = _restrict_to(sp.g_prime, sub)
        eps_total = sequence_product(eps_total, _lift_to(sp.epsilon, G))
        gam_total = sequence_product(_lift_to(sp.gamma, G), gam_total)
        den = 1
        for vec in sp.gamma.coeffs.values():
            for a in vec:
                den = math.lcm(den, Fraction(a).denominator)
        growth = max(1, eta.modulus, den, math.ceil(math.e * float(sigma)))
        steps.append(Step(eta, M, cert, sigma, H.m))
        M *= growth
        cur = nxt
    smooth = smoothness_report(eps_total, N, M)
    period = period_of_rational_sequence(gam_total, M) if gam_total.exact else None
    return FactorizationResult(eps_total, cur, gam_total, cur.group, M, N, tuple(steps), final, smooth, period)


# ---------------------------------------------------------- progression split


@dataclass(frozen=True)
class ProgressionPiece:
    offset: int
    step: int
    x: GroupElement
    y: GroupElement
    bound: Scalar


def progression_decomposition(g: PolySeq, N: int, M0: int = 4, A: float = 2,
                              result: FactorizationResult | None = None) -> Tuple[FactorizationResult, List[ProgressionPiece]]:
    """Split [N] into residue classes mod the period of γ.

    On each class g(n)Γ lies in ε(n) G' y Γ with y = γ(r); the bound is the
    largest coordinate distance between ε(n) and x = ε(first element).
    """
    res = result or factorize_full(g, N, M0, A)
    q = res.period.q if res.period else 1
    pieces = []
    for r in range(1, min(q, N) + 1):
        first = res.epsilon((r,))
        bound = Fraction(0)
        for n in range(r, N + 1, q):
            e = res.epsilon((n,))
            bound = smax([bound] + [abs(a - b) for a, b in zip(e.psi, first.psi)])
        pieces.append(ProgressionPiece(r % q, q, first, res.gamma((r,)), bound))
    return res, pieces


# ------------------------------------------------------------ relative square


@dataclass(frozen=True)
class RelativeSquare:
    group: NilGroup  # G□ as a subgroup of ambient
    ambient: NilGroup  # G × G
    base: NilGroup
    left: Tuple[int, ...]  # positions of the first factor in ambient coordinates
    right: Tuple[int, ...]

    def pair(self, x: GroupElement, y: GroupElement) -> GroupElement:
        """(x, y) in G□ coordinates."""
        psi = [Fraction(0)] * self.ambient.m
        for i, p in enumerate(self.left):
            psi[p] = x.psi[i]
        for i, p in enumerate(self.right):
            psi[p] = y.psi[i]
        return self.group.from_parent(self.ambient.element(psi))

    def split(self, z: GroupElement) -> Tuple[GroupElement, GroupElement]:
        amb = self.group.to_parent(z)
        return (self.base.element([amb.psi[p] for p in self.left]),
                self.base.element([amb.psi[p] for p in self.right]))


def relative_square(group: NilGroup) -> RelativeSquare:
    """G□ = G ×_{G_2} G with (G□)_i = G_i ×_{G_{i+1}} G_i."""
    f = group.filtration
    d = f.degree
    if d < 2:
        raise ValueError("relative square needs a filtration of degree at least 2")
    amb, left, right = direct_product(group, group)
    m2 = amb.m

    def diag(a):
        v = [Fraction(0)] * m2
        v[left[a]] = Fraction(1)
        v[right[a]] = Fraction(1)
        return v

    def second(b):
        v = [Fraction(0)] * m2
        v[right[b]] = Fraction(1)
        return v

    levels = []
    for i in range(1, d + 1):
        rows = [diag(a) for a in range(f.first_index(i), group.m)]
        rows += [second(b) for b in range(f.first_index(i + 1), group.m)]
        levels.append(rows)
    basis = _malcev_from_levels(amb, levels)
    sq = subgroup(amb, basis, name=f"square({group.name})")
    return RelativeSquare(sq, amb, group, tuple(left), tuple(right))


def filtration_property_holds(group: NilGroup) -> bool:
    """[G_i, G_j] ⊆ G_{i+j} read off the structure constants."""
    f = group.filtration
    for i, j, k, c in group.algebra.entries:
        need = f.level(i) + f.level(j)
        if need > f.degree or f.level(k) < need:
            return False
    return True


def vdc_square_sequence(g: PolySeq, h: int, square: RelativeSquare | None = None,
                        check: bool = True, samples: int = 20, seed: int = 0) -> PolySeq:
    """n -> ({a^h}^{-1} g(n+h) [a^h]^{-1}, g(n)) on G□, a = g(1).

    Equal to ({a^h}^{-1} g_nonlin(n+h) a^n {a^h}, g_nonlin(n) a^n).
    """
    G = g.group
    if g.t != 1:
        raise ValueError("vdC square sequences are one-parameter")
    if not all(is_zero(a) for a in g.psi((0,))):
        raise ValueError("vdC square sequence needs g(0) = id")
    a = g((1,))
    if smax(abs(x) for x in a.psi) > 1:
        raise ValueError("vdC square sequence needs |ψ(g(1))| <= 1")
    sq = square or relative_square(G)
    red = reduce_fundamental(G.power(a, h))
    left, right = G.invert(red.frac), G.invert(red.lat)

    def val(n):
        first = G.multiply(G.multiply(left, g((n[0] + h,))), right)
        return sq.pair(first, g(n)).psi

    D = max(1, g.degree) * G.tables.mul_degree ** 2 * sq.group.tables.conv_degree * sq.ambient.tables.conv_degree
    out = refit(sq.group, 1, val, D)
    if check:
        res = polynomial_membership_test(out, kmax=min(3, sq.group.degree + 1), samples=samples, seed=seed)
        if not res.ok:
            raise NotPolynomialError(f"square sequence failed Host-Kra sampling: {res.failure}")
    return out


@dataclass(frozen=True)
class SquareCharacterSplit:
    k1: Tuple[int, ...]  # η1 on G
    k2: Tuple[int, ...]  # η2 on G_2, zero outside the G_2 coordinates
    modulus1: int
    modulus2: int
    annihilates: bool


def split_square_character(eta: HorizontalCharacter, square: RelativeSquare, samples: int = 50,
                           seed: int = 0) -> SquareCharacterSplit:
    """η(g', g) = η1(g) + η2(g' g^{-1}) with η1(g) = η(g, g), η2(x) = η(x, id)."""
    if eta.group != square.group:
        raise ValueError("character is not defined on this relative square")
    G = square.base
    f = G.filtration
    start2 = f.first_index(2)

    def lift(x, y):
        return eta.lift(square.pair(x, y))

    k1, k2 = [], []
    for i in range(G.m):
        e = G.generator(i)
        v = lift(e, e)
        if Fraction(v).denominator != 1:
            raise ValueError("η does not annihilate Γ□")
        k1.append(int(v))
    for b in range(G.m):
        if b < start2:
            k2.append(0)
            continue
        v = lift(G.generator(b), G.identity())
        if Fraction(v).denominator != 1:
            raise ValueError("η does not annihilate Γ□")
        k2.append(int(v))
    rng = random.Random(seed)
    ok = True
    for _ in range(samples):
        x = G.element([Fraction(rng.randint(-20, 20), rng.randint(1, 9)) for _ in range(G.m)])
        y = G.element([Fraction(0)] * start2 + [Fraction(rng.randint(-20, 20), rng.randint(1, 9))
                                                for _ in range(G.m - start2)])
        c = G.commutator(x, y)
        if sum((a * b for a, b in zip(k2, c.psi)), Fraction(0)) != 0:
            ok = False
            break
    return SquareCharacterSplit(tuple(k1), tuple(k2), max(map(abs, k1), default=0),
                                max(map(abs, k2), default=0), ok)
