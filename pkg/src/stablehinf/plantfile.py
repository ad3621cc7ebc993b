"""JSON plant descriptions and CSV/JSON result files."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .quasipoly import DelayTerm, QuasiPoly, QuasiPolyError
from .rational import RationalFn

_DELAY = re.compile(r"^\s*\d+(\s*/\s*[1-9]\d*)?\s*$")


class PlantFileError(ValueError):
    """Malformed plant file; the message names the offending field."""


@dataclass(frozen=True)
class PlantSpec:
    R: QuasiPoly
    T: QuasiPoly
    W: RationalFn
    source: dict

    @property
    def delay_free(self) -> bool:
        return self.R.delays == [0] and self.T.delays == [0]


def parse_delay(value, where: str) -> Fraction:
    if not isinstance(value, str):
        raise PlantFileError(f"{where}: delay must be a string like \"3\" or \"1/2\", got {value!r}")
    if not _DELAY.match(value):
        raise PlantFileError(f"{where}: delay {value!r} is not an exact rational \"p\" or \"p/q\"")
    return Fraction(value.replace(" ", ""))


def _coeffs(obj, key, where):
    if key not in obj:
        raise PlantFileError(f"{where}: missing field {key!r}")
    c = obj[key]
    if (not isinstance(c, list) or not c
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in c)):
        raise PlantFileError(f"{where}.{key}: expected a non-empty list of numbers")
    if not np.all(np.isfinite(c)):
        raise PlantFileError(f"{where}.{key}: non-finite coefficient")
    return [float(x) for x in c]


def _rational(obj, where) -> RationalFn:
    if not isinstance(obj, dict):
        raise PlantFileError(f"{where}: expected an object")
    num, den = _coeffs(obj, "num_coeffs", where), _coeffs(obj, "den_coeffs", where)
    if not any(den):
        raise PlantFileError(f"{where}.den_coeffs: denominator is identically zero")
    return RationalFn.from_coeffs(num, den)


def _terms(doc, key) -> QuasiPoly:
    if key not in doc:
        raise PlantFileError(f"missing field {key!r}")
    terms = doc[key]
    if not isinstance(terms, list) or not terms:
        raise PlantFileError(f"{key}: expected a non-empty list of terms")
    out = []
    for i, t in enumerate(terms):
        where = f"{key}[{i}]"
        if not isinstance(t, dict):
            raise PlantFileError(f"{where}: expected an object")
        if "delay" not in t:
            raise PlantFileError(f"{where}: missing field 'delay'")
        out.append(DelayTerm(_rational(t, where), parse_delay(t["delay"], f"{where}.delay")))
    try:
        return QuasiPoly(out)
    except QuasiPolyError as exc:
        raise PlantFileError(f"{key}: {exc}") from None


def parse_plant(doc: dict) -> PlantSpec:
    if not isinstance(doc, dict):
        raise PlantFileError("top level must be a JSON object")
    R, T = _terms(doc, "R_terms"), _terms(doc, "T_terms")
    if "weight" not in doc:
        raise PlantFileError("missing field 'weight'")
    W = _rational(doc["weight"], "weight")
    return PlantSpec(R, T, W, doc)


def load_plant(path) -> PlantSpec:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlantFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_plant(doc)


def complex_list(values):
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def from_complex_list(pairs):
    return [complex(a, b) for a, b in pairs]


def real_coeffs(p):
    """Descending real coefficient list of a numpy Polynomial."""
    return [float(x) for x in np.real(p.coef[::-1])]


def write_response_csv(path, x, values, xname: str):
    """Columns ``xname, real, imag, magnitude, phase_rad``."""
    values = np.asarray(values, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([xname, "real", "imag", "magnitude", "phase_rad"])
        for a, v in zip(x, values):
            w.writerow([repr(float(a)), repr(float(v.real)), repr(float(v.imag)),
                        repr(float(abs(v))), repr(float(np.angle(v)))])


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
