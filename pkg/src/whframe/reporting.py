"""JSON rendering with every float written to 17 significant digits."""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np


def _float(x: float) -> str:
    if not math.isfinite(x):
        # JSON has no inf/nan literals
        return json.dumps(str(x))
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent, level, out):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is None else ","
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, (complex, np.complexfloating)):
        _encode([obj.real, obj.imag], indent, level, out)
    elif isinstance(obj, Fraction):
        out.append(json.dumps(str(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(sep)
            out.append(pad + json.dumps(str(k)) + ": ")
            _encode(v, indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(sep)
            out.append(pad)
            _encode(v, indent, level + 1, out)
        out.append(end + "]")
    elif hasattr(obj, "to_dict"):
        _encode(obj.to_dict(), indent, level, out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int | None = 2) -> str:
    out: list = []
    _encode(obj, indent, 0, out)
    return "".join(out)


def fmt(x: float) -> str:
    return format(float(x), ".17g")
