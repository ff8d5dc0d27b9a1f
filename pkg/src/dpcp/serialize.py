"""JSON and key=value serialization helpers for report dataclasses."""

from __future__ import annotations

import dataclasses
import json

import numpy as np


def as_plain(obj):
    """Recursively convert dataclasses / numpy values to plain Python containers."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: as_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): as_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [as_plain(v) for v in obj]
    return obj


def to_json(obj, indent: int = 2) -> str:
    return json.dumps(as_plain(obj), indent=indent, allow_nan=True)


def _kv_lines(prefix: str, value, out: list[str]) -> None:
    if isinstance(value, dict):
        for k in value:
            _kv_lines(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    elif isinstance(value, list):
        out.append(f"{prefix}=" + ",".join(_scalar(v) for v in value))
    else:
        out.append(f"{prefix}={_scalar(value)}")


def _scalar(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def to_kv(obj) -> str:
    """Line-oriented key=value rendering; nested fields use dotted keys."""
    out: list[str] = []
    _kv_lines("", as_plain(obj), out)
    return "\n".join(out) + "\n"
