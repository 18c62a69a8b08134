"""Deterministic JSON and plain-text rendering of report dictionaries."""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

FLOAT_FORMAT = "%.12e"


def plain(obj):
    """Reduce numpy values, dataclasses and tuples to JSON-ready Python objects."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return plain(dataclasses.asdict(obj))
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


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return FLOAT_FORMAT % (x + 0.0)


def _emit(obj, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, key in enumerate(sorted(obj)):
            out.append(pad + json.dumps(key, ensure_ascii=False) + ": ")
            _emit(obj[key], indent, level + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            out.append("[" + ", ".join(_float(v) if isinstance(v, float) else str(v) for v in obj) + "]")
            return
        out.append("[\n")
        for k, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    else:
        out.append(json.dumps(str(obj), ensure_ascii=False))


def to_json(obj, indent: int = 2) -> str:
    out: list[str] = []
    _emit(plain(obj), indent, 0, out)
    return "".join(out) + "\n"


def to_text(obj, prefix: str = "") -> str:
    """Flatten nested dictionaries into ``dotted.key: value`` lines."""
    obj = plain(obj)
    lines: list[str] = []

    def walk(o, key):
        if isinstance(o, dict):
            for k in sorted(o):
                walk(o[k], f"{key}.{k}" if key else k)
        elif isinstance(o, list) and any(isinstance(v, (dict, list)) for v in o):
            for i, v in enumerate(o):
                walk(v, f"{key}[{i}]")
        elif isinstance(o, list):
            lines.append(f"{key}: " + " ".join(_float(v) if isinstance(v, float) else str(v) for v in o))
        elif isinstance(o, float):
            lines.append(f"{key}: {_float(o)}")
        else:
            lines.append(f"{key}: {o}")

    walk(obj, prefix)
    return "\n".join(lines) + "\n"
