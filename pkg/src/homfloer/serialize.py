"""JSON output with floats written to 17 significant digits.

The stdlib encoder always uses the shortest round-trip repr, so floats are
formatted here by a small recursive writer. Non-finite floats become null.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def fmt_float(v: float) -> str:
    return f"{float(v):.17g}"


def _enc(obj, ind: int, level: int) -> str:
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    pad, inner = " " * (ind * level), " " * (ind * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {_enc(v, ind, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_enc(v, ind, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _enc(v, ind, level + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _enc(obj, indent, 0) + "\n"


def dump(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def load(path):
    return json.loads(Path(path).read_text())
