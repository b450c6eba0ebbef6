"""Persistence: exact series files, trace tables and pole catalogs.

Series files are JSON with every rational written as a "p/q" string.  All
writes go to a temporary file in the target directory and are renamed into
place, so a reader never sees a partial file.
"""

from __future__ import annotations

import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

from .normal_form import Forcing, NormalFormSeries
from .series import TPoly, VSeries, WSeries, apply_L

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "SchemaError", "atomic_write", "save_series", "load_series", "series_to_dict", "series_from_dict", "write_trace", "read_trace", "write_catalog"]


class SchemaError(ValueError):
    pass


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _unq(s: str) -> Fraction:
    if not isinstance(s, str):
        raise SchemaError(f"rational must be a 'p/q' string, got {s!r}")
    return Fraction(s)


def _vs_to(v: VSeries) -> dict:
    # {k: [[c_{k,n,0}, c_{k,n,1}, ...] for n]}
    return {str(k): [[_q(c) for c in tp.coeffs] for tp in w.coeffs] for k, w in sorted(v.coeffs.items())}


def _vs_from(d: dict, K: int, N: int) -> VSeries:
    coeffs = {}
    for k, rows in d.items():
        coeffs[int(k)] = WSeries([TPoly([_unq(c) for c in row]) for row in rows], N)
    return VSeries(coeffs, K=K, N=N)


def series_to_dict(nf: NormalFormSeries) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "header": {
            "forcing": [_q(c) for c in nf.forcing.coeffs],
            "K": nf.K,
            "N": nf.N,
            "x0": _q(nf.x0),
            "gauge": _q(nf.gauge_gamma7_0),
        },
        "gamma": _vs_to(nf.gamma),
        "eta": _vs_to(nf.eta),
        "theta": _vs_to(nf.theta),
    }


def series_from_dict(d: dict) -> NormalFormSeries:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        h = d["header"]
        K, N = int(h["K"]), int(h["N"])
        gamma = _vs_from(d["gamma"], K + 1, N)
        eta = _vs_from(d["eta"], K + 1, N)
        theta = _vs_from(d["theta"], K, N)
        forcing = Forcing(tuple(_unq(c) for c in h["forcing"]))
        x0, gauge = _unq(h["x0"]), _unq(h["gauge"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed series file: {exc}") from exc
    return NormalFormSeries(gamma=gamma, eta=eta, theta=theta, Lgamma=apply_L(gamma), K=K, N=N, forcing=forcing, gauge_gamma7_0=gauge, x0=x0)


def save_series(nf: NormalFormSeries, path) -> None:
    atomic_write(path, json.dumps(series_to_dict(nf), indent=1, sort_keys=True) + "\n")


def load_series(path) -> NormalFormSeries:
    with open(path, encoding="utf-8") as fh:
        return series_from_dict(json.load(fh))


def _f(x: float) -> str:
    return f"{x:.17g}"


TRACE_COLUMNS = ("s", "re_x", "im_x", "re_y", "im_y", "re_yp", "im_yp")


def write_trace(trace, path) -> None:
    lines = [
        "# P1 solution trace",
        "# columns: " + " ".join(TRACE_COLUMNS),
        "# s = arc length along the path; complex values as (re, im) pairs",
        f"# status: {trace.status}",
    ]
    for s, x, y, yp in zip(trace.s, trace.x, trace.y, trace.yp):
        lines.append("\t".join(_f(v) for v in (s, x.real, x.imag, y.real, y.imag, yp.real, yp.imag)))
    atomic_write(path, "\n".join(lines) + "\n")


def read_trace(path) -> list[tuple]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            v = [float(c) for c in line.split("\t")]
            rows.append((v[0], complex(v[1], v[2]), complex(v[3], v[4]), complex(v[5], v[6])))
    return rows


def _canon(obj):
    if isinstance(obj, float):
        return float(_f(obj))
    if isinstance(obj, complex):
        return [float(_f(obj.real)), float(_f(obj.imag))]
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    return obj


def write_catalog(catalog, path) -> None:
    """``catalog`` is a dict or list of dicts (pole_map output)."""
    atomic_write(path, json.dumps(_canon(catalog), indent=1, sort_keys=True) + "\n")
