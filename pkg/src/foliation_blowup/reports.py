"""
Deterministic report serialization.

Floats are written with 17 significant digits so that identical runs give
byte-identical files; numpy scalars and arrays are converted on the way.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np


def _float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == 0:
        return "0.0"
    return format(x, ".17g")


def plain(obj: Any) -> Any:
    """Convert numpy containers and scalars into JSON-ready Python objects."""
    if hasattr(obj, "to_json"):
        return plain(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with fixed float formatting and sorted keys."""
    out: list[str] = []

    def emit(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(v, dict):
            if not v:
                out.append("{}")
                return
            out.append("{\n")
            for i, key in enumerate(sorted(v)):
                out.append(f"{pad}{json.dumps(key)}: ")
                emit(v[key], level + 1)
                out.append(",\n" if i < len(v) - 1 else "\n")
            out.append(end + "}")
        elif isinstance(v, list):
            if not v:
                out.append("[]")
            elif all(not isinstance(e, (dict, list)) for e in v):
                out.append("[")
                for i, e in enumerate(v):
                    emit(e, level + 1)
                    if i < len(v) - 1:
                        out.append(", ")
                out.append("]")
            else:
                out.append("[\n")
                for i, e in enumerate(v):
                    out.append(pad)
                    emit(e, level + 1)
                    out.append(",\n" if i < len(v) - 1 else "\n")
                out.append(end + "]")
        elif isinstance(v, bool) or v is None or isinstance(v, (int, str)):
            out.append(json.dumps(v))
        elif isinstance(v, float):
            out.append(_float(v))
        else:
            raise TypeError(f"cannot serialize {type(v).__name__}")

    emit(plain(obj), 0)
    return "".join(out) + "\n"


def write_json(path: Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj))


def csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_float(float(c)) if isinstance(c, (float, np.floating)) else plain(c) for c in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    Path(path).write_text(csv_text(header, rows))
