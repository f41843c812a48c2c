"""Canonical JSON writing: fixed field order, floats at 17 significant digits.

The standard json encoder formats floats with repr, which is shortest
round-trip rather than fixed-width; reports and instance files here must be
byte-stable across runs, so the writer is explicit.  Non-finite floats are
encoded as the strings "inf" and "-inf" (they never appear in instance
files, only in reports).
"""

from __future__ import annotations

import json
import math

__all__ = ["canonical_json"]


def _fmt_float(v: float) -> str:
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    if math.isnan(v):
        return '"nan"'
    if v == int(v) and abs(v) < 1e16:
        return format(v, ".1f")
    return format(v, ".17g")


def _write(obj, out, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad_in + json.dumps(str(k)) + ": ")
            _write(v, out, indent, level + 1)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            out.append("[]")
            return
        simple = all(isinstance(v, (int, float, bool)) or v is None for v in obj)
        if simple:
            out.append("[" + ", ".join(_scalar(v) for v in obj) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad_in)
            _write(v, out, indent, level + 1)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return _fmt_float(float(v))


def canonical_json(obj, indent: int = 2) -> str:
    out: list = []
    _write(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)
