"""CSV and JSON serialization of results."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .core import ProbabilityCurve

__all__ = ["fmt", "write_table", "write_curve", "write_json", "curve_to_dict", "version_string"]


def version_string() -> str:
    return f"chiral_rabi {__version__}"


def fmt(x) -> str:
    """Shortest round-tripping text for a number."""
    if isinstance(x, (str, bytes)):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_table(path, header, columns):
    """Write equal-length columns under ``header``; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = zip(*columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_curve(path, curve: ProbabilityCurve):
    n = len(curve)
    return write_table(path, ["t", "p", "std_err", "method"],
                       [curve.times, curve.values, curve.std_errors, [curve.method] * n])


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and type(obj).__module__.startswith("chiral_rabi"):
        return _plain(obj.value)
    return obj


def write_json(path, payload: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def curve_to_dict(curve: ProbabilityCurve) -> dict:
    return {
        "times": curve.times, "values": curve.values,
        "std_errors": curve.std_errors, "method": curve.method, "meta": curve.meta,
    }
