"""
JSON file formats

Modules, potentials and Gamma towers are read through the pydantic models in
`models`; every failure is reported as a ParseError whose witness names the
line/column (syntax) or the field path (schema and content).

Series are objects mapping comma-joined exponents "m1,...,mr" to scalar
strings; z-dependent terms of a log series carry the suffix "|z=e1,...,er".
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple, Union

from pydantic import BaseModel, ValidationError

from .correspondence import GammaTower
from .errors import FrobHodgeError, ParseError
from .frobenius import FrobeniusModule
from .models import MODULE_SCHEMA, POTENTIAL_SCHEMA, TOWER_SCHEMA, MatrixEntry, ModuleFile, PotentialFile, TowerFile
from .potential import QuantumPotential
from .scalars import format_scalar, parse_scalar
from .series import LogPolySeries, QSeries, SeriesMatrix, degree_key

PathLike = Union[str, Path]


# ============================================================
# Low-level helpers
# ============================================================

def read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}", witness={'file': str(path)}) from exc
    return loads(text, source=str(path))


def _unique_keys(source: str):
    def hook(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
        out: Dict[str, Any] = {}
        for key, value in pairs:
            if key in out:
                raise ParseError(f"{source}: duplicate key {key!r}", witness={'file': source, 'key': key})
            out[key] = value
        return out
    return hook


def loads(text: str, source: str = "<string>") -> Any:
    try:
        return json.loads(text, object_pairs_hook=_unique_keys(source))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}",
                         witness={'file': source, 'line': exc.lineno, 'column': exc.colno}) from exc


def dumps(payload: Any) -> str:
    """Deterministic JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _validate(model: type, data: Any, source: str) -> BaseModel:
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(p) for p in first['loc'])
        raise ParseError(f"{source}: field '{field}': {first['msg']}",
                         witness={'file': source, 'field': field}) from exc


def _field_error(source: str, field: str, message: str) -> ParseError:
    return ParseError(f"{source}: field '{field}': {message}", witness={'file': source, 'field': field})


def _indices(key: str, count: int, source: str, field: str) -> Tuple[int, ...]:
    parts = key.split(",") if key else []
    try:
        values = tuple(int(p) for p in parts)
    except ValueError:
        raise _field_error(source, field, f"key {key!r} is not a list of integers") from None
    if count >= 0 and len(values) != count:
        raise _field_error(source, field, f"key {key!r} needs {count} indices")
    return values


def _scalar(text: str, source: str, field: str):
    try:
        return parse_scalar(text)
    except ParseError as exc:
        raise _field_error(source, field, str(exc)) from exc


def _key(values) -> str:
    return ",".join(str(v) for v in values)


def _check_schema(found: str, expected: str, source: str) -> None:
    if found != expected:
        raise _field_error(source, "schema_version", f"expected {expected!r}, got {found!r}")


# ============================================================
# Series
# ============================================================

def series_to_payload(s) -> Dict[str, str]:
    """QSeries or LogPolySeries -> {"m1,..,mr[|z=e1,..,er]": scalar}."""
    out = {}
    for z, part in LogPolySeries.lift(s).items():
        suffix = f"|z={_key(z)}" if any(z) else ""
        for m, c in sorted(part.coeffs.items(), key=lambda kv: degree_key(kv[0])):
            out[_key(m) + suffix] = format_scalar(c)
    return out


def series_from_payload(data: Mapping[str, str], r: int, order: int, source: str = "<data>",
                        field: str = "series"):
    """Inverse of series_to_payload; returns a QSeries when no z-term occurs."""
    terms: Dict[Tuple[int, ...], Dict[Tuple[int, ...], object]] = {}
    for key, text in data.items():
        q_part, _, z_part = key.partition("|z=")
        m = _indices(q_part, r, source, f"{field}.{key}")
        z = _indices(z_part, r, source, f"{field}.{key}") if z_part else (0,) * r
        if any(e < 0 for e in m + z):
            raise _field_error(source, f"{field}.{key}", "negative exponent")
        if sum(m) > order:
            raise _field_error(source, f"{field}.{key}", f"exponent exceeds order {order}")
        terms.setdefault(z, {})[m] = _scalar(text, source, f"{field}.{key}")
    if set(terms) <= {(0,) * r}:
        return QSeries(r, order, terms.get((0,) * r, {}))
    return LogPolySeries(r, order, {z: QSeries(r, order, coeffs) for z, coeffs in terms.items()})


def matrix_to_payload(S: SeriesMatrix) -> List[Dict[str, Any]]:
    return [MatrixEntry(row=i, col=j, series=series_to_payload(s)).model_dump()
            for (i, j), s in sorted(S.entries.items())]


def matrix_from_payload(entries: List[MatrixEntry], size: int, r: int, order: int,
                        source: str = "<data>", field: str = "entries") -> SeriesMatrix:
    out = {}
    for t, entry in enumerate(entries):
        where = f"{field}.{t}"
        if not (0 <= entry.row < size and 0 <= entry.col < size):
            raise _field_error(source, where, f"entry ({entry.row}, {entry.col}) outside {size}x{size}")
        out[(entry.row, entry.col)] = series_from_payload(entry.series, r, order, source, f"{where}.series")
    return SeriesMatrix(size, r, order, out)


# ============================================================
# Modules
# ============================================================

def module_to_payload(M: FrobeniusModule) -> Dict[str, Any]:
    pairing = {_key((a, b)): format_scalar(c)
               for a, row in enumerate(M.pairing) for b, c in enumerate(row) if c}
    products = {_key(key): [(c, format_scalar(v)) for c, v in sorted(image.items())]
                for key, image in sorted(M.products.items())}
    return ModuleFile(weight=M.k, dims=list(M.dims), degrees=list(M.degrees), labels=list(M.labels),
                      pairing=pairing, products=products, framing=list(M.framing),
                      real=M.real).model_dump(mode='json')


def module_from_payload(data: Any, source: str = "<data>") -> FrobeniusModule:
    parsed: ModuleFile = _validate(ModuleFile, data, source)
    _check_schema(parsed.schema_version, MODULE_SCHEMA, source)
    pairing = {}
    for key, text in parsed.pairing.items():
        pairing[_indices(key, 2, source, f"pairing.{key}")] = _scalar(text, source, f"pairing.{key}")
    products = {}
    for key, image in parsed.products.items():
        j, a = _indices(key, 2, source, f"products.{key}")
        products[(j, a)] = {c: _scalar(v, source, f"products.{key}.{c}") for c, v in image}
    try:
        return FrobeniusModule.from_data(parsed.weight, parsed.dims, pairing, products, parsed.framing,
                                         real=parsed.real, degrees=parsed.degrees, labels=parsed.labels)
    except FrobHodgeError as exc:
        if isinstance(exc, ParseError):
            raise
        raise type(exc)(f"{source}: {exc}", witness=exc.witness) from exc


def read_module(path: PathLike) -> FrobeniusModule:
    return module_from_payload(read_json(path), source=str(path))


# ============================================================
# Potentials
# ============================================================

def potential_to_payload(phi: QuantumPotential) -> Dict[str, Any]:
    seen = set()
    phi_ab = {}
    for (a, b), s in sorted(phi.phi_ab.items()):
        if (b, a) in seen and phi.phi_ab.get((b, a)) == s:
            continue
        seen.add((a, b))
        phi_ab[_key((a, b))] = series_to_payload(s)
    return PotentialFile(
        order=phi.order,
        weight3=series_to_payload(phi.weight3) if phi.weight3 is not None else None,
        phi_a={str(a): series_to_payload(s) for a, s in sorted(phi.phi_a.items())},
        phi_ab=phi_ab,
    ).model_dump(mode='json', exclude_none=True)


def potential_from_payload(M: FrobeniusModule, data: Any, source: str = "<data>") -> QuantumPotential:
    parsed: PotentialFile = _validate(PotentialFile, data, source)
    _check_schema(parsed.schema_version, POTENTIAL_SCHEMA, source)
    r, D = M.r, parsed.order

    def series(block: Mapping[str, str], field: str) -> QSeries:
        s = series_from_payload(block, r, D, source, field)
        if not isinstance(s, QSeries):
            raise _field_error(source, field, "potential series cannot carry z-terms")
        return s

    phi_a = {}
    for key, block in parsed.phi_a.items():
        (a,) = _indices(key, 1, source, f"phi_a.{key}")
        phi_a[a] = series(block, f"phi_a.{key}")
    phi_ab = {}
    for key, block in parsed.phi_ab.items():
        phi_ab[_indices(key, 2, source, f"phi_ab.{key}")] = series(block, f"phi_ab.{key}")
    weight3 = series(parsed.weight3, "weight3") if parsed.weight3 is not None else None
    return QuantumPotential(M, phi_a=phi_a, phi_ab=phi_ab, weight3=weight3, order=D)


def read_potential(M: FrobeniusModule, path: PathLike) -> QuantumPotential:
    return potential_from_payload(M, read_json(path), source=str(path))


# ============================================================
# Gamma towers
# ============================================================

def tower_to_payload(tower: GammaTower) -> Dict[str, Any]:
    pieces = {str(l): matrix_to_payload(tower[l]) for l in range(1, tower.k + 1) if tower[l]}
    return TowerFile(order=tower.order, r=tower.r, pieces=pieces).model_dump(mode='json')


def tower_from_payload(M: FrobeniusModule, data: Any, source: str = "<data>") -> GammaTower:
    parsed: TowerFile = _validate(TowerFile, data, source)
    _check_schema(parsed.schema_version, TOWER_SCHEMA, source)
    if parsed.r != M.r:
        raise _field_error(source, "r", f"tower has r = {parsed.r}, module has r = {M.r}")
    pieces = {}
    for key, entries in parsed.pieces.items():
        (l,) = _indices(key, 1, source, f"pieces.{key}")
        if not 1 <= l <= M.k:
            raise _field_error(source, f"pieces.{key}", f"level {l} outside 1..{M.k}")
        piece = matrix_from_payload(entries, M.n, parsed.r, parsed.order, source, f"pieces.{key}")
        if not piece.is_pure:
            raise _field_error(source, f"pieces.{key}", "tower entries cannot carry z-terms")
        pieces[l] = piece
    return GammaTower(M, pieces, r=parsed.r, order=parsed.order)


def read_tower(M: FrobeniusModule, path: PathLike) -> GammaTower:
    return tower_from_payload(M, read_json(path), source=str(path))


def write_json(path: PathLike, payload: Any) -> None:
    Path(path).write_text(dumps(payload))
