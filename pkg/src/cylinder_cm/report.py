"""Deterministic report serialization.

Reports must be bit-identical across repeated runs, so JSON is emitted by
a small canonical serializer: keys sorted, floats at 17 significant digits
(lossless for doubles), Fractions as 'p/q' strings.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction

import numpy as np


def _fmt_float(x: float) -> str:
    if x != x:
        return '"nan"'
    if x in (float("inf"), float("-inf")):
        return f'"{x}"'
    return f"{x:.17g}"


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def canonical_json(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, Fraction):
        return f'"{obj.numerator}/{obj.denominator}"'
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return f'"{_escape(obj)}"'
    if isinstance(obj, np.ndarray):
        return canonical_json(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ",".join(f'"{_escape(str(k))}":{canonical_json(v)}'
                              for k, v in items) + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def config_hash(config_dict: dict) -> str:
    return hashlib.sha256(canonical_json(config_dict).encode()).hexdigest()


def write_report(path, payload: dict) -> str:
    text = canonical_json(payload)
    with open(path, "w") as fh:
        fh.write(text)
    return text
