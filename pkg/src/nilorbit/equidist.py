"""Orbits, character spectra and equidistribution certificates.

Equidistribution is certified against the family of horizontal characters
with |k| <= K, never against every Lipschitz function.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ._phase import fixed_point, grid_phases
from .lie_core import NilGroup
from .nilmanifold import HorizontalCharacter, annihilates_commutators, horizontal_lattice, reduce_fundamental
from .polyseq import PolySeq, _sizes, compose_character, dilate_sequence, smoothness_norm
from .scalar import Scalar

FAMILY = "horizontal characters"
BATCH = 16


def orbit_sample(g: PolySeq, N, stride: int = 1, start: int = 1) -> Iterator[Tuple[Scalar, ...]]:
    """Stream reduced fundamental-domain coordinates of g(n), n in [N]."""
    if stride < 1:
        raise ValueError("stride must be positive")
    sizes = _sizes(N, g.t)
    ranges = [range(start, start + s, stride) for s in sizes]
    for n in itertools.product(*ranges):
        yield reduce_fundamental(g(n)).frac.psi


def _is_abelian(group: NilGroup) -> bool:
    return group.filtration.degree <= 1 or not group.algebra.entries


def coordinate_phases(g: PolySeq, N, coords: Sequence[int]) -> np.ndarray:
    """Array (len(coords), prod N) of psi_i(g(n)) mod 1 over the box [N]."""
    sizes = _sizes(N, g.t)
    total = int(np.prod(sizes))
    out = np.zeros((len(coords), total))
    for row, i in enumerate(coords):
        A = {j: fixed_point(v[i]) for j, v in g.coeffs.items() if v[i] != 0}
        if A:
            out[row] = grid_phases(A, sizes).ravel()
    return out


def orbit_array(g: PolySeq, N) -> np.ndarray:
    """Reduced orbit points as floats, shape (prod N, m)."""
    if _is_abelian(g.group):
        return coordinate_phases(g, N, range(g.group.m)).T
    return np.array([[float(a) for a in p] for p in orbit_sample(g, N)])


def horizontal_characters(group: NilGroup, K: int) -> List[Tuple[int, ...]]:
    """Valid nonzero frequencies with |k| <= K, one per ± pair (first nonzero entry positive).

    Sorted by modulus, then lexicographically.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    coords, aligned = horizontal_lattice(group)
    m = group.m
    out = []
    for vals in itertools.product(range(-K, K + 1), repeat=len(coords)):
        lead = next((v for v in vals if v), 0)
        if lead <= 0:
            continue
        k = [0] * m
        for i, v in zip(coords, vals):
            k[i] = v
        k = tuple(k)
        if not aligned and not annihilates_commutators(group, k):
            continue
        out.append(k)
    out.sort(key=lambda k: (max(abs(a) for a in k), k))
    return out


@dataclass(frozen=True)
class SpectrumEntry:
    k: Tuple[int, ...]
    S: complex

    @property
    def magnitude(self) -> float:
        return abs(self.S)


@dataclass(frozen=True)
class SpectrumReport:
    entries: Tuple[SpectrumEntry, ...]
    N: Tuple[int, ...]
    K: int

    @property
    def max_abs(self) -> float:
        return max((e.magnitude for e in self.entries), default=0.0)

    def strongest(self) -> Optional[SpectrumEntry]:
        """Largest |S| (to 1e-9), then smallest |k|, then lexicographic k."""
        if not self.entries:
            return None
        return min(self.entries, key=lambda e: (-round(e.magnitude, 9), max(abs(a) for a in e.k), e.k))


def character_spectrum(g: PolySeq, N, K: int, characters=None, threads: int = 1) -> SpectrumReport:
    sizes = _sizes(N, g.t)
    chars = list(characters) if characters is not None else horizontal_characters(g.group, K)
    if not chars:
        return SpectrumReport((), sizes, K)
    used = sorted({i for k in chars for i, a in enumerate(k) if a})
    phases = coordinate_phases(g, sizes, used)
    kmat = np.array([[k[i] for i in used] for k in chars], dtype=float)

    def batch(s):
        theta = kmat[s:s + BATCH] @ phases
        theta -= np.floor(theta)
        ang = 2 * np.pi * theta
        return np.cos(ang).mean(axis=1), np.sin(ang).mean(axis=1)

    starts = range(0, len(chars), BATCH)
    if threads > 1:
        # batches are independent; map() keeps the merge order fixed
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(batch, starts))
    else:
        parts = [batch(s) for s in starts]
    entries = []
    for s, (re, im) in zip(starts, parts):
        for r in range(len(re)):
            entries.append(SpectrumEntry(chars[s + r], complex(re[r], im[r])))
    return SpectrumReport(tuple(entries), sizes, K)


@dataclass(frozen=True)
class Certificate:
    equidistributed: bool
    delta: float
    K: int
    N: Tuple[int, ...]
    max_abs: float
    eta: Optional[HorizontalCharacter] = None
    S: Optional[complex] = None
    value: Optional[Scalar] = None  # ‖η∘g‖_{C∞[N]}
    q: int = 1
    q_value: Optional[Scalar] = None  # ‖q η∘g‖_{C∞[N]}
    progression: Optional[Tuple[int, int, int]] = None  # (offset r, step q, length): n = r + q n'
    family: str = FAMILY

    @property
    def kind(self) -> str:
        return "equidistributed" if self.equidistributed else "obstruction"


def certify_equidistribution(g: PolySeq, N, delta: float, K: int, Q: int | None = None) -> Certificate:
    """Equidistributed if every nontrivial |S(η)| <= δ for |η| <= K, else an obstruction.

    The obstruction's character is the one with the largest |S|; its
    smoothness norm is reported plain and after the best multiplier q <= Q
    (Q defaults to K).
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    sizes = _sizes(N, g.t)
    rep = character_spectrum(g, sizes, K)
    top = rep.strongest()
    if top is None or top.magnitude <= delta:
        return Certificate(True, delta, K, sizes, rep.max_abs)
    eta = HorizontalCharacter(g.group, top.k)
    p = compose_character(eta, g)
    value, _ = smoothness_norm(p, sizes)
    q_value, q = smoothness_norm(p, sizes, Q or K)
    return Certificate(False, delta, K, sizes, rep.max_abs, eta, top.S, value, q, q_value)


def progressions(N: int, delta: float, q_max: int = 20, min_length: int | None = None):
    """(r, q, L) with n = r + q n', n' in [L], covering the default grid."""
    min_length = min_length if min_length is not None else max(1, math.ceil(delta * N))
    for q in range(1, q_max + 1):
        for r in range(q):
            L = (N - r) // q
            if L >= min_length and L >= 1:
                yield r, q, L


@dataclass(frozen=True)
class TotalCertificate:
    certificate: Certificate
    checked: int

    @property
    def equidistributed(self) -> bool:
        return self.certificate.equidistributed


def certify_total_equidistribution(g: PolySeq, N: int, delta: float, K: int, q_max: int = 20,
                                   min_length: int | None = None) -> TotalCertificate:
    """Certify every progression of the grid; return the worst one.

    Worst means an obstruction with the largest |S| (ties to smaller q, then
    smaller offset), or, if all pass, the largest |S| seen.
    """
    if g.t != 1:
        raise ValueError("total equidistribution is implemented for one-parameter sequences")
    worst: Optional[Certificate] = None
    checked = 0
    for r, q, L in progressions(N, delta, q_max, min_length):
        h = g if (r, q) == (0, 1) else dilate_sequence(g, r, q)
        cert = certify_equidistribution(h, L, delta, K)
        cert = Certificate(cert.equidistributed, cert.delta, cert.K, cert.N, cert.max_abs, cert.eta,
                           cert.S, cert.value, cert.q, cert.q_value, (r, q, L))
        checked += 1
        if worst is None or _worse(cert, worst):
            worst = cert
    if worst is None:
        raise ValueError("no progression in the grid is long enough")
    return TotalCertificate(worst, checked)


def _worse(a: Certificate, b: Certificate) -> bool:
    if a.equidistributed != b.equidistributed:
        return not a.equidistributed
    return round(a.max_abs, 9) > round(b.max_abs, 9)


def lipschitz_average(F: Callable[[np.ndarray], complex], g: PolySeq, N, samples: int = 4096,
                      seed: int = 0) -> complex:
    """E_{n∈[N]} F(reduced g(n)) minus a scrambled-Sobol estimate of ∫F.

    Lebesgue measure on the coordinate cube is the Haar measure of G/Γ.
    Diagnostic only.
    """
    from scipy.stats import qmc

    pts = orbit_array(g, N)
    avg = np.mean([F(x) for x in pts])
    sob = qmc.Sobol(d=g.group.m, scramble=True, seed=seed)
    cube = sob.random(samples)
    integral = np.mean([F(x) for x in cube])
    out = avg - integral
    return complex(out) if np.iscomplexobj(out) else float(out)
