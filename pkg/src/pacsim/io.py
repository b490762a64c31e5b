"""Deterministic CSV/JSON emission helpers.

Floats print with 9 significant digits; no timestamps or environment data
are written, so identical inputs produce bit-identical files.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


def format_value(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.9g}"
    if isinstance(x, complex):
        return f"{x.real:.9g}{x.imag:+.9g}j"
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(x) for x in row) + "\n")
    return path


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_sidecar(csv_path, params: dict) -> Path:
    """JSON sidecar with the fully resolved parameter set of an emission."""
    path = sidecar_path(csv_path)
    write_json(path, params)
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonify)
        fh.write("\n")
    return path


def _jsonify(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "tolist"):
        return x.tolist()
    if hasattr(x, "to_dict"):
        return x.to_dict()
    raise TypeError(f"cannot serialise {type(x)!r}")
