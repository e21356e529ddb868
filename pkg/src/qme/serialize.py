"""JSON conventions shared by every module.

Complex scalars are ``[re, im]`` pairs, matrices are row-major nested lists of
pairs. Floats are written with ``repr`` (shortest round-trip form).
"""

import json
import math

import numpy as np

from .errors import ConfigError


def complex_to_json(z):
    z = complex(z)
    return [float(z.real), float(z.imag)]


def matrix_to_json(M):
    M = np.asarray(M)
    if M.ndim == 1:
        return [complex_to_json(v) for v in M]
    return [[complex_to_json(v) for v in row] for row in M]


def matrix_from_json(data, path="matrix"):
    """Decode a row-major nested list of ``[re, im]`` pairs."""
    if not isinstance(data, list) or not data:
        raise ConfigError("expected a non-empty list of rows", path)
    rows = []
    for i, row in enumerate(data):
        if not isinstance(row, list):
            raise ConfigError("expected a list of [re, im] pairs", f"{path}[{i}]")
        vals = []
        for j, pair in enumerate(row):
            where = f"{path}[{i}][{j}]"
            if (not isinstance(pair, list) or len(pair) != 2
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)):
                raise ConfigError("complex scalars must be [re, im] pairs", where)
            if not all(math.isfinite(x) for x in pair):
                raise ConfigError("entries must be finite", where)
            vals.append(complex(pair[0], pair[1]))
        rows.append(vals)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError("rows have different lengths", path)
    return np.array(rows, dtype=np.complex128)


def _default(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return matrix_to_json(obj)
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return complex_to_json(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _plain(obj):
    """Convert to plain JSON types, turning ``-0.0`` into ``0.0``."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float):
        return obj + 0.0
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    return _plain(_default(obj))


def _format(obj, level):
    if isinstance(obj, dict) and obj:
        pad = "  " * (level + 1)
        items = [f"{pad}{json.dumps(k)}: {_format(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * level + "}"
    if isinstance(obj, list) and any(isinstance(v, dict) for v in obj):
        pad = "  " * (level + 1)
        items = [pad + _format(v, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * level + "]"
    return json.dumps(obj, allow_nan=True, separators=(", ", ": "))


def dumps(obj):
    """Deterministic JSON text: objects indented, arrays of numbers kept on one line."""
    return _format(_plain(obj), 0) + "\n"
