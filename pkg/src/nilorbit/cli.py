"""nilorbit command line."""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .fileio import InputError, dumps_report, group_to_data, load_group, load_sequence, sequence_to_data
from .lie_core import FiltrationError, LieAlgebraError, NilGroup
from .scalar import format_scalar

COMMANDS = ("orbit", "spectrum", "certify", "factorize", "hk-check", "square")

EXIT_OK, EXIT_PARSE, EXIT_INVARIANT, EXIT_OVERFLOW = 0, 2, 3, 4


@dataclass
class JobSpec:
    command: str
    group_source: str
    group: NilGroup
    seq_path: Optional[str] = None
    seq: object = None
    N: Optional[int] = None
    K: Optional[int] = None
    delta: Optional[float] = None
    M0: Optional[int] = None
    A: Optional[float] = None
    q_max: int = 20
    radius: int = 3
    seed: int = 0
    threads: int = 1
    out: Optional[str] = None
    csv: Optional[str] = None
    echo: dict = field(default_factory=dict)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nilorbit", description="Polynomial orbits on nilmanifolds.")
    p.add_argument("--version", action="version", version=f"nilorbit {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--group", required=True, help="preset (torus:m, heisenberg, ut:n) or JSON/TOML file")
    p.add_argument("--seq", help="polynomial sequence JSON")
    p.add_argument("--N", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--M0", type=int)
    p.add_argument("--A", type=float)
    p.add_argument("--q-max", dest="q_max", type=int, default=20)
    p.add_argument("--radius", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--csv")
    return p


_DEFAULTS = {
    "orbit": {"N": 1000},
    "spectrum": {"N": 10000, "K": 10},
    "certify": {"N": 10000, "K": 10, "delta": 0.05},
    "factorize": {"N": 10000, "M0": 4, "A": 2.0},
    "hk-check": {"N": 50, "K": 3},
    "square": {"K": 3},
}
_NEEDS_SEQ = {"orbit", "spectrum", "certify", "factorize", "hk-check"}


def parse_spec(argv=None) -> JobSpec:
    """Validate everything before any computation; raises InputError on bad input."""
    args = build_parser().parse_args(argv)
    prec = os.environ.get("NILORBIT_PRECISION")
    if prec is not None:
        try:
            if int(prec) < 64:
                raise ValueError
        except ValueError:
            raise InputError("must be an integer >= 64", "NILORBIT_PRECISION") from None
    group = load_group(args.group)
    spec = JobSpec(args.command, args.group, group, args.seq, q_max=args.q_max, radius=args.radius,
                   seed=args.seed, threads=args.threads, out=args.out, csv=args.csv)
    for key, val in _DEFAULTS[args.command].items():
        setattr(spec, key, getattr(args, key) if getattr(args, key) is not None else val)
    for key in ("N", "K", "delta", "M0", "A"):
        if getattr(spec, key) is None and getattr(args, key) is not None:
            setattr(spec, key, getattr(args, key))
    if spec.command in _NEEDS_SEQ and not args.seq:
        raise InputError(f"'{spec.command}' needs a sequence file", "--seq")
    if args.seq:
        spec.seq = load_sequence(args.seq, group)
    if spec.N is not None and spec.N < 1:
        raise InputError("must be positive", "--N")
    if spec.K is not None and spec.K < 1:
        raise InputError("must be positive", "--K")
    if spec.delta is not None and not 0 < spec.delta < 1:
        raise InputError("must lie in (0, 1)", "--delta")
    if spec.M0 is not None and spec.M0 < 2:
        raise InputError("must be at least 2", "--M0")
    if spec.A is not None and spec.A <= 0:
        raise InputError("must be positive", "--A")
    if spec.q_max < 1:
        raise InputError("must be positive", "--q-max")
    if spec.radius < 1:
        raise InputError("must be positive", "--radius")
    if spec.threads < 1:
        raise InputError("must be positive", "--threads")
    if spec.command == "square" and group.filtration.degree < 2:
        raise InputError("relative square needs a filtration of degree >= 2", "--group")
    spec.echo = {
        "group": group_to_data(group), "group_source": args.group,
        "sequence": sequence_to_data(spec.seq) if spec.seq is not None else None,
        "N": spec.N, "K": spec.K, "delta": spec.delta, "M0": spec.M0, "A": spec.A,
        "q_max": spec.q_max, "radius": spec.radius, "seed": spec.seed,
        "precision_bits": int(prec) if prec else 128,
    }
    return spec


def _k(k):
    return [int(a) for a in k]


def _cert(c) -> dict:
    out = {"verdict": c.kind, "delta": c.delta, "K": c.K, "N": list(c.N), "max_abs": round(c.max_abs, 12),
           "family": f"{c.family} with |k| <= {c.K}"}
    if not c.equidistributed:
        out.update({"eta": _k(c.eta.k), "S": [round(c.S.real, 12), round(c.S.imag, 12)],
                    "smoothness": format_scalar(c.value), "q": c.q, "q_smoothness": format_scalar(c.q_value)})
    if c.progression:
        out["progression"] = {"offset": c.progression[0], "step": c.progression[1], "length": c.progression[2]}
    return out


def run_orbit(spec: JobSpec) -> dict:
    from .equidist import orbit_sample
    from .nilmanifold import quotient_metric_estimate

    G = spec.group
    rows = []
    for n, pt in enumerate(orbit_sample(spec.seq, spec.N), start=1):
        rows.append((n, pt))
    if spec.csv:
        with open(spec.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n"] + [f"psi_{i + 1}" for i in range(G.m)])
            for n, pt in rows:
                w.writerow([n] + [repr(float(a)) for a in pt])
    head = []
    for n, pt in rows[:10]:
        d = quotient_metric_estimate(G.element(pt), G.identity(), spec.radius)
        head.append({"n": n, "point": [format_scalar(a) for a in pt], "distance_to_origin": format_scalar(d)})
    return {"points": len(rows), "first": head, "csv": spec.csv}


def run_spectrum(spec: JobSpec) -> dict:
    from .equidist import character_spectrum

    rep = character_spectrum(spec.seq, spec.N, spec.K, threads=spec.threads)
    return {"N": list(rep.N), "K": rep.K, "count": len(rep.entries), "max_abs": round(rep.max_abs, 12),
            "entries": [{"k": _k(e.k), "S": [round(e.S.real, 12), round(e.S.imag, 12)],
                         "abs": round(e.magnitude, 12)} for e in rep.entries]}


def run_certify(spec: JobSpec) -> dict:
    from .equidist import certify_equidistribution, certify_total_equidistribution

    cert = certify_equidistribution(spec.seq, spec.N, spec.delta, spec.K)
    out = {"full": _cert(cert)}
    if spec.seq.t == 1:
        tc = certify_total_equidistribution(spec.seq, spec.N, spec.delta, spec.K, spec.q_max)
        out["total"] = _cert(tc.certificate)
        out["total"]["progressions_checked"] = tc.checked
    return out


def run_factorize(spec: JobSpec) -> dict:
    from .factorize import factorize_full

    res = factorize_full(spec.seq, spec.N, spec.M0, spec.A, q_max=spec.q_max)
    sm = res.smoothness
    return {
        "epsilon": sequence_to_data(res.epsilon),
        "g_prime": sequence_to_data(res.g_prime),
        "gamma": sequence_to_data(res.gamma),
        "subgroup_basis": [[format_scalar(a) for a in v] for v in res.subgroup_basis],
        "subgroup_filtration": list(res.subgroup.filtration.dims),
        "M": res.M,
        "iterations": res.iterations,
        "steps": [{"eta": _k(s.eta.k), "group_dim": s.group_dim, "M": s.M, "sigma": format_scalar(s.sigma),
                   "certificate": _cert(s.certificate)} for s in res.steps],
        "certificates": {
            "epsilon_smoothness": {"max_abs": format_scalar(sm.max_abs), "max_increment": format_scalar(sm.max_increment),
                                   "N": sm.N, "M": sm.M, "ok": sm.ok},
            "gamma_period": ({"q": res.period.q, "sample_checked": res.period.sample_checked}
                             if res.period else None),
            "g_prime_equidistribution": _cert(res.final) if res.final else None,
        },
    }


def run_hk(spec: JobSpec) -> dict:
    from .polyseq import polynomial_membership_test

    res = polynomial_membership_test(spec.seq, kmax=spec.K, samples=100, seed=spec.seed, spread=spec.N)
    return {"member": res.ok, "samples": res.samples, "kmax": spec.K, "seed": spec.seed,
            "failure": res.failure,
            "note": "membership certified per sampled parallelepiped only"}


def run_square(spec: JobSpec) -> dict:
    from .factorize import filtration_property_holds, relative_square, vdc_square_sequence

    sq = relative_square(spec.group)
    out = {"dimension": sq.group.m, "filtration": list(sq.group.filtration.dims),
           "basis": [[format_scalar(a) for a in v] for v in sq.group.basis.vectors],
           "ambient_filtration": list(sq.ambient.filtration.dims),
           "structure_constants": group_to_data(sq.group)["structure_constants"],
           "filtration_property": filtration_property_holds(sq.group)}
    if spec.seq is not None:
        seqs = []
        for h in range(1, spec.K + 1):
            s = vdc_square_sequence(spec.seq, h, sq, seed=spec.seed)
            seqs.append({"h": h, "sequence": sequence_to_data(s)})
        out["vdc_sequences"] = seqs
    return out


_RUNNERS = {"orbit": run_orbit, "spectrum": run_spectrum, "certify": run_certify,
            "factorize": run_factorize, "hk-check": run_hk, "square": run_square}


def run_job(spec: JobSpec) -> int:
    result = _RUNNERS[spec.command](spec)
    text = dumps_report(spec.command, spec.echo, result)
    if spec.out:
        Path(spec.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    from .factorize import FactorizationInvariantError, RationalizationOverflow
    from .nilmanifold import CharacterError
    from .polyseq import NotPolynomialError

    try:
        spec = parse_spec(argv)
    except (InputError, LieAlgebraError, FiltrationError) as exc:
        print(f"nilorbit: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        return run_job(spec)
    except (RationalizationOverflow, OverflowError) as exc:
        print(f"nilorbit: numeric overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (FactorizationInvariantError, NotPolynomialError, CharacterError, LieAlgebraError,
            FiltrationError, ValueError) as exc:
        print(f"nilorbit: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
