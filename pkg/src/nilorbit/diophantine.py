"""Witness-producing diophantine searches.

Every routine takes explicit search bounds and reports the best value it
found; none of them asserts the existence statements they are modelled on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._phase import exp_mean, fixed_point, grid_phases
from .polyseq import TorusPoly, _sizes, smoothness_norm
from .scalar import Ordered, Scalar, binary_fraction, frac, norm_rz, normalize, slt, to_float

MAX_BOX_DIM = 6
MAX_BOX_POINTS = 6_000_000


@dataclass(frozen=True)
class DioWitness:
    k: Tuple[int, ...]
    achieved: Scalar
    K: int
    N: Optional[Tuple[int, ...]] = None
    method: str = ""

    def __post_init__(self):
        if not self.k or not any(self.k):
            raise ValueError("witness frequency must be nonzero")
        if max(abs(x) for x in self.k) > self.K:
            raise ValueError("witness frequency exceeds its search bound")

    @property
    def modulus(self) -> int:
        return max(abs(x) for x in self.k)

    def to_dict(self) -> dict:
        from .scalar import format_scalar

        return {"k": list(self.k), "achieved": format_scalar(self.achieved), "K": self.K,
                "N": list(self.N) if self.N else None, "method": self.method}


def _dot_norm(k: Sequence[int], alpha: Sequence[Scalar]) -> Scalar:
    return norm_rz(sum((a * x for a, x in zip(k, alpha) if a), Fraction(0)))


def verify_kronecker(w: DioWitness, alpha) -> bool:
    alpha = _vector(alpha)
    return _dot_norm(w.k, alpha) == w.achieved


def _vector(alpha) -> Tuple[Scalar, ...]:
    if isinstance(alpha, (list, tuple, np.ndarray)):
        return tuple(normalize(a) for a in alpha)
    return (normalize(alpha),)


def _sign_normal(k) -> bool:
    for a in k:
        if a:
            return a > 0
    return False


def _order_key(value, k):
    return (Ordered(value), max(abs(a) for a in k), tuple(k))


def convergent_denominators(x: Fraction, K: int) -> List[int]:
    """Denominators q_n <= K of the continued-fraction convergents of x."""
    out = []
    q_prev, q = 0, 1
    y = x - math.floor(x)
    while True:
        if q > K:
            break
        out.append(q)
        if y == 0:
            break
        y = 1 / y
        a = math.floor(y)
        y -= a
        q_prev, q = q, a * q + q_prev
    return out


def _kronecker_1d(alpha: Scalar, K: int) -> Tuple[Tuple[int], Scalar]:
    x = binary_fraction(frac(alpha))
    dens = convergent_denominators(x, K)
    cands = {dens[-1]}
    if x.denominator <= 2 * K:
        # ‖kx‖ = ‖k'x‖ only when k ≡ ±k' modulo the denominator
        for q in dens:
            alt = x.denominator - q
            if 0 < alt <= K:
                cands.add(alt)
    best = min(((_dot_norm((q,), (alpha,)), q) for q in cands), key=lambda vq: _order_key(vq[0], (vq[1],)))
    return (best[1],), best[0]


def _box_scan(alpha: Tuple[Scalar, ...], K: int) -> Tuple[Tuple[int, ...], Scalar]:
    m = len(alpha)
    if m > MAX_BOX_DIM:
        raise ValueError(f"box enumeration limited to dimension {MAX_BOX_DIM}")
    total = (2 * K + 1) ** m
    if total > MAX_BOX_POINTS:
        raise ValueError(f"search box of {total} points is too large")
    af = np.array([to_float(frac(a)) for a in alpha])
    grid = np.stack(np.meshgrid(*[np.arange(-K, K + 1)] * m, indexing="ij"), axis=-1).reshape(-1, m)
    # keep one representative of ±k: first nonzero entry positive
    nz = grid != 0
    first = np.argmax(nz, axis=1)
    lead = grid[np.arange(len(grid)), first]
    grid = grid[lead > 0]
    vals = grid @ af
    vals = np.abs(vals - np.round(vals))
    vmin = vals.min()
    slack = 1e-12 * (1 + m * K)
    cand = grid[vals <= vmin + slack]
    best = None
    for k in cand:
        k = tuple(int(x) for x in k)
        v = _dot_norm(k, alpha)
        if best is None or _order_key(v, k) < _order_key(*best[::-1]):
            best = (k, v)
    return best


def kronecker_witness(alpha, N: int, K: int, target: Scalar | None = None) -> Optional[DioWitness]:
    """Best k with 0 < |k| <= K for ‖k·α‖_{R/Z}.

    With a target, the witness is returned only if ‖k·α‖ <= target/N.
    Ties go to the smallest sup-norm, then lexicographic order of the
    sign-normalized vector.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if N < 1:
        raise ValueError("N must be at least 1")
    vec = _vector(alpha)
    if len(vec) == 1:
        k, v = _kronecker_1d(vec[0], K)
        method = "continued-fraction"
    else:
        k, v = _box_scan(vec, K)
        method = "box"
    if target is not None and slt(normalize(target) / N, v):
        return None
    return DioWitness(k, v, K, (N,), method)


# ------------------------------------------------------------------ Weyl sums


def torus_fixed(p: TorusPoly) -> dict:
    return {j: fixed_point(a) for j, a in p.coeffs.items()}


def weyl_sum(p: TorusPoly, N) -> complex:
    """E_{n∈[N]} e(p(n)) (box [N_1]×…×[N_t] for several parameters)."""
    sizes = _sizes(N, p.t)
    if not p.coeffs:
        return complex(1.0, 0.0)
    return exp_mean(grid_phases(torus_fixed(p), sizes))


@dataclass
class VdcReport:
    correlations: np.ndarray  # index h = 0..N-1
    H: int
    lhs: float
    rhs: float
    holds: bool
    delta: float
    large_count: int
    required_count: float
    count_applicable: bool
    count_holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def vdc_correlations(a, H: int, tol: float = 1e-9) -> VdcReport:
    """Correlations E_{n∈[N]} a_{n+h} conj(a_n) and the van der Corput check.

    The sequence is extended by zero outside [N].
    """
    a = np.asarray(a, dtype=complex)
    N = len(a)
    if N == 0:
        raise ValueError("empty sequence")
    if H < 1:
        raise ValueError("H must be at least 1")
    if np.max(np.abs(a)) > 1 + 1e-12:
        raise ValueError("sequence must be bounded by 1 in modulus")
    size = 1 << (2 * N - 1).bit_length()
    fa = np.fft.fft(a, size)
    corr = np.fft.ifft(np.conj(fa) * fa)[:N] / N  # corr[h] = E a_{n+h} conj(a_n)
    mean = a.sum() / N
    lhs = abs(mean) ** 2
    hs = np.arange(0, min(H, N))
    w = 1 - hs / H
    # E a_n conj(a_{n+h}) = conj(corr[h]) and corr[-h]; their sum is 2 Re corr[h]
    total = corr[0].real + 2 * float(np.sum(w[1:] * corr[hs[1:]].real))
    rhs = (N + H) / (H * N) * total
    delta = abs(mean)
    thresh = delta ** 2 / 8
    # h ranges over [N]; the correlation at h = N vanishes identically
    large = int(np.sum(np.abs(corr[1:]) >= thresh))
    required = delta ** 2 * N / 8
    applicable = 0 < delta < 1 and N > 4 / delta ** 2
    return VdcReport(corr, H, lhs, rhs, lhs <= rhs + tol, delta, large, required, applicable,
                     (not applicable) or large >= required)


def weyl_witness(p: TorusPoly, N, K: int, target: Scalar | None = None) -> Optional[DioWitness]:
    """Scan 1 <= k <= K for the smallest ‖k p‖_{C∞[N]} (ties to the smaller k)."""
    if K < 1:
        raise ValueError("K must be at least 1")
    sizes = _sizes(N, p.t)
    best, best_k = smoothness_norm(p, sizes, K)
    if target is not None and slt(normalize(target), best):
        return None
    return DioWitness((best_k,), best, K, sizes, "scan")


@dataclass(frozen=True)
class RecurrenceResult:
    hits: int
    N: int
    witness: Optional[DioWitness]
    threshold: Scalar
    fallback: bool


def _hit_count(phases: np.ndarray, lo: float, hi: float) -> int:
    lo, hi = lo % 1.0, hi - math.floor(lo)
    if hi - lo >= 1:
        return int(phases.size)
    if hi <= 1:
        return int(np.sum((phases >= lo) & (phases < hi)))
    return int(np.sum((phases >= lo) | (phases < hi - 1)))


def recurrence_witness(p: TorusPoly, N: int, interval: Tuple[float, float], delta: float,
                       K: int | None = None, c: float = 1.0) -> RecurrenceResult:
    """Count p(n) mod 1 in the interval; on heavy recurrence look for k with small ‖kp‖.

    The witness must satisfy ‖kp‖_{C∞[N]} <= c·ε·δ^{-d}, ε the interval length.
    """
    if p.t != 1:
        raise ValueError("recurrence witnesses are one-parameter")
    lo, hi = float(interval[0]), float(interval[1])
    eps = hi - lo
    if eps <= 0:
        raise ValueError("interval must have positive length")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    K = K or max(1, math.ceil(1 / delta))
    phases = grid_phases(torus_fixed(p), (N,)) if p.coeffs else np.zeros(N)
    hits = _hit_count(phases, lo, hi)
    d = max(p.degree, 1)
    if eps > delta / 2:
        w = weyl_witness(p, N, K)
        return RecurrenceResult(hits, N, w, w.achieved, True)
    threshold = c * eps * delta ** (-d)
    witness = None
    if hits >= delta * N:
        witness = weyl_witness(p, N, K, threshold)
    return RecurrenceResult(hits, N, witness, threshold, False)


@dataclass(frozen=True)
class BracketVerdict:
    kind: str  # "small_zeta" or "gamma_witness"
    bound: float  # certified quantity times N
    hits: int
    hypothesis: bool
    violations: Tuple[str, ...] = ()
    indices: Tuple[int, ...] = ()
    witness: Optional[DioWitness] = None
    interval: Optional[Tuple[int, int]] = None


def bracket_witness(beta, alpha, zeta, gamma, N: int, delta: float, K: int | None = None) -> BracketVerdict:
    """Dichotomy for ‖β + αh + ζ·{γh}‖ <= 1/(δN) on many h ∈ [N].

    Either every |ζ_i| is O(1/N) (reported as N·max|ζ_i|), or a Kronecker
    witness k for γ is found on a densely hit subinterval.
    """
    zeta = [float(z) for z in zeta]
    gamma_v = _vector(gamma)
    m = len(zeta)
    if len(gamma_v) != m:
        raise ValueError("ζ and γ must have the same length")
    violations = []
    if abs(float(alpha)) > 1 / (delta * N):
        violations.append("|alpha| > 1/(delta N)")
    if max(abs(z) for z in zeta) > 1 / delta:
        violations.append("|zeta| > 1/delta")
    h = np.arange(1, N + 1, dtype=float)
    gf = np.array([to_float(frac(g)) for g in gamma_v])
    fr = np.mod(np.outer(h, gf), 1.0)
    val = float(beta) + float(alpha) * h + fr @ np.array(zeta)
    dist = np.abs(val - np.round(val))
    hit = dist <= 1 / (delta * N)
    hits = int(hit.sum())
    hyp = hits >= delta * N
    zmax = max(abs(z) for z in zeta)
    if zmax <= 20 / (delta ** 2 * N):
        return BracketVerdict("small_zeta", zmax * N, hits, hyp, tuple(violations), tuple(range(m)))
    # locate a subinterval of length ~δ²N with hit density >= δ
    L = max(1, int(delta ** 2 * N))
    chosen = (1, N)
    for start in range(0, N, L):
        seg = hit[start:start + L]
        if seg.size and seg.mean() >= delta:
            chosen = (start + 1, start + seg.size)
            break
    K = K or max(1, math.ceil(delta ** -2))
    w = kronecker_witness(gamma_v, N, K)
    return BracketVerdict("gamma_witness", float(w.achieved) * N, hits, hyp, tuple(violations),
                          (), w, chosen)
