"""Group and sequence files, and deterministic JSON reports."""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict

from .lie_core import (FiltrationError, LieAlgebraData, LieAlgebraError, NilGroup,
                       build_malcev_basis, preset, subgroup)
from .polyseq import PolySeq, TorusPoly
from .scalar import format_scalar, parse_scalar

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA = "nilorbit-report/1"


class InputError(ValueError):
    """Malformed input; ``location`` says where."""

    def __init__(self, msg: str, location: str = ""):
        super().__init__(f"{location}: {msg}" if location else msg)
        self.location = location


def _read_mapping(path: Path) -> dict:
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read file ({exc.strerror})", str(path)) from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text.decode("utf-8"))
        else:
            data = json.loads(text)
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputError(f"malformed file: {exc}", str(path)) from exc
    if not isinstance(data, dict):
        raise InputError("top level must be a table/object", str(path))
    return data


def _rational(x, where: str) -> Fraction:
    try:
        v = parse_scalar(x)
    except ValueError as exc:
        raise InputError(str(exc), where) from exc
    if not isinstance(v, Fraction):
        raise InputError("expected an exact rational", where)
    return v


def group_from_data(data: dict, source: str = "<group>") -> NilGroup:
    """Build a group from {dimension, structure_constants, filtration, basis?}.

    Structure constants are [i, j, k, num, den] rows with 1-based indices.
    """
    if "dimension" not in data:
        raise InputError("missing 'dimension'", source)
    m = data["dimension"]
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise InputError("'dimension' must be a positive integer", f"{source}:dimension")
    entries = []
    for r, row in enumerate(data.get("structure_constants", []) or []):
        where = f"{source}:structure_constants[{r}]"
        if not isinstance(row, (list, tuple)) or len(row) not in (4, 5):
            raise InputError("rows are [i, j, k, num, den]", where)
        i, j, k = row[:3]
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (i, j, k)):
            raise InputError("indices must be integers", where)
        if not all(1 <= x <= m for x in (i, j, k)):
            raise InputError(f"index out of range 1..{m}", where)
        num = _rational(row[3], where)
        den = _rational(row[4], where) if len(row) == 5 else Fraction(1)
        if den == 0:
            raise InputError("zero denominator", where)
        entries.append((i - 1, j - 1, k - 1, num / den))
    try:
        alg = LieAlgebraData.from_entries(m, entries)
    except LieAlgebraError as exc:
        raise InputError(str(exc), f"{source}:structure_constants") from exc
    filt = data.get("filtration")
    if filt is not None:
        if not isinstance(filt, list) or not all(isinstance(x, int) for x in filt):
            raise InputError("filtration must be a list of integers", f"{source}:filtration")
    name = str(data.get("name", Path(source).stem))
    try:
        group = NilGroup(alg, filt, name=name)
    except (FiltrationError, LieAlgebraError, ValueError) as exc:
        raise InputError(str(exc), f"{source}:filtration") from exc
    basis = data.get("basis")
    if basis is not None:
        rows = []
        for r, row in enumerate(basis):
            if not isinstance(row, list) or len(row) != m:
                raise InputError(f"basis rows must have length {m}", f"{source}:basis[{r}]")
            rows.append([_rational(x, f"{source}:basis[{r}]") for x in row])
        try:
            mb = build_malcev_basis(group, rows, group.filtration)
            group = subgroup(group, mb, name=name)
        except (FiltrationError, LieAlgebraError, ValueError) as exc:
            raise InputError(str(exc), f"{source}:basis") from exc
    return group


def load_group(source: str) -> NilGroup:
    """A preset name ("torus:m", "heisenberg", "ut:n") or a JSON/TOML file."""
    path = Path(source)
    if path.suffix.lower() in (".json", ".toml") or path.exists():
        return group_from_data(_read_mapping(path), str(path))
    try:
        return preset(source)
    except ValueError as exc:
        raise InputError(str(exc), "--group") from exc


def group_to_data(group: NilGroup) -> dict:
    return {
        "name": group.name,
        "dimension": group.m,
        "structure_constants": [[i + 1, j + 1, k + 1, c.numerator, c.denominator]
                                for i, j, k, c in group.algebra.entries if i < j],
        "filtration": list(group.filtration.dims),
    }


# ---------------------------------------------------------------- sequences


def sequence_to_data(seq: PolySeq) -> dict:
    return {
        "t": seq.t,
        "d": seq.degree,
        "coefficients": [{"j": list(j), "vector": [format_scalar(a) for a in vec]}
                         for j, vec in seq.coeffs.items()],
    }


def sequence_from_data(data: dict, group: NilGroup, source: str = "<sequence>") -> PolySeq:
    t = data.get("t", 1)
    if not isinstance(t, int) or t < 1:
        raise InputError("'t' must be a positive integer", f"{source}:t")
    coeffs = {}
    for r, entry in enumerate(data.get("coefficients", [])):
        where = f"{source}:coefficients[{r}]"
        if not isinstance(entry, dict) or "j" not in entry or "vector" not in entry:
            raise InputError("entries are {j: [...], vector: [...]}", where)
        j = entry["j"]
        if isinstance(j, int):
            j = [j]
        if len(j) != t or not all(isinstance(x, int) and x >= 0 for x in j):
            raise InputError(f"multi-index must have {t} nonnegative entries", where)
        vec = entry["vector"]
        if len(vec) != group.m:
            raise InputError(f"vector must have {group.m} entries", where)
        try:
            vals = tuple(parse_scalar(x) for x in vec)
        except ValueError as exc:
            raise InputError(str(exc), where) from exc
        if tuple(j) in coeffs:
            raise InputError(f"duplicate multi-index {j}", where)
        coeffs[tuple(j)] = vals
    d = data.get("d")
    try:
        seq = PolySeq(group, t, coeffs)
    except ValueError as exc:
        raise InputError(str(exc), source) from exc
    if d is not None and seq.degree > d:
        raise InputError(f"declared degree {d} is below the actual degree {seq.degree}", f"{source}:d")
    return seq


def load_sequence(path: str, group: NilGroup) -> PolySeq:
    p = Path(path)
    return sequence_from_data(_read_mapping(p), group, str(p))


def torus_poly_to_data(p: TorusPoly) -> dict:
    return {"t": p.t, "d": p.degree,
            "coefficients": [{"j": list(j), "value": format_scalar(a)} for j, a in p.coeffs.items()]}


# ------------------------------------------------------------------ reports


def dumps_report(command: str, inputs: Dict[str, Any], result: Dict[str, Any]) -> str:
    """Byte-stable JSON: sorted keys, fixed indentation, trailing newline."""
    from . import __version__

    doc = {"schema": SCHEMA, "library": {"name": "nilorbit", "version": __version__},
           "command": command, "input": inputs, "result": result}
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, default=_default) + "\n"


def _default(obj):
    if isinstance(obj, Fraction):
        return format_scalar(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    try:
        import numpy as np

        if isinstance(obj, np.generic):
            return obj.item()
    except ImportError:  # pragma: no cover
        pass
    return format_scalar(obj)
