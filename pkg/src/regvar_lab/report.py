"""Deterministic report serialisation: JSON with 17 significant digits, and plain text."""
from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np

REPORT_VERSION = "regvar-lab.report/1"


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    if x == 0:
        return "0.0" if math.copysign(1.0, x) > 0 else "-0.0"
    s = format(x, ".17g")
    return s if ("." in s or "e" in s) else s + ".0"


def to_jsonable(obj):
    """Plain Python structure; numpy scalars/arrays, tuples and Fractions converted."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return str(obj)


def dumps(obj, indent: int = 2) -> str:
    """Serialise with a fixed key order (insertion) and fixed float format."""
    return _emit(to_jsonable(obj), indent, 0) + "\n"


def _emit(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _emit(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float(obj)
    if obj is None:
        return "null"
    return json.dumps(obj, ensure_ascii=False)


def render_text(envelope: dict) -> str:
    """Short human-readable summary: scalar fields of the results, one per line."""
    lines = [f"{envelope['command']}: {envelope['status']}"]
    if envelope.get("error"):
        lines.append(f"error: {envelope['error']}")
    if envelope.get("text"):
        lines.append(envelope["text"])

    def walk(prefix, obj, depth):
        if depth > 2:
            return
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else k, v, depth + 1)
        elif isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
            lines.append(f"{prefix} = {obj}")
        elif isinstance(obj, float):
            lines.append(f"{prefix} = {obj:.12g}")

    walk("", to_jsonable(envelope.get("results", {})), 0)
    return "\n".join(lines) + "\n"
