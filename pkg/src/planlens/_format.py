"""Deterministic formatting and digest helpers for emitted artifacts.

Every file the package writes goes through these helpers so that a given
config and input set produces byte-identical output on repeat runs.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

# All floats are emitted with 12 significant digits.
_FLOAT_SPEC = ".12g"


def fmt_float(x: float) -> str:
    """Render a float with 12 significant digits, stable across platforms."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), _FLOAT_SPEC)


def round12(x: float) -> float:
    """Round a float to 12 significant digits (used before JSON encoding)."""
    if math.isnan(x) or math.isinf(x):
        return float(x)
    return float(format(float(x), _FLOAT_SPEC))


def json_ready(obj: Any) -> Any:
    """Recursively convert an object into JSON-encodable primitives.

    Floats are rounded to 12 significant digits; numpy scalars and arrays
    are converted to their Python equivalents.
    """
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return round12(float(obj))
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def dumps_json(obj: Any) -> str:
    return json.dumps(json_ready(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: Path | str, obj: Any) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def write_csv(path: Path | str, header: list[str], rows: list[list[Any]]) -> None:
    """Write a CSV with fixed '\\n' newlines and 12-digit float formatting.

    Cells are emitted verbatim for strings and ints; floats go through
    fmt_float. None becomes the empty cell.
    """
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if cell is None:
                cells.append("")
            elif isinstance(cell, (float, np.floating)):
                cells.append(fmt_float(float(cell)))
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path | str) -> str:
    return sha256_bytes(Path(path).read_bytes())


def sha256_text(text: str) -> str:
    return sha256_bytes(text.encode("utf-8"))
