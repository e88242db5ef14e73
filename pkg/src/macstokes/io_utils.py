"""Deterministic text output: CSV and JSON writers with fixed float formatting.

All floats are rendered with 17 significant digits so identical inputs give
byte-identical files, independent of Python's shortest-repr behavior.
"""

from __future__ import annotations

import os
from typing import Any


def fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(path, header: list[str], rows: list[list[Any]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _json_render(obj: Any, indent: int) -> str:
    pad = " " * indent
    pad_in = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad_in}"{k}": {_json_render(v, indent + 2)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad_in}{_json_render(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return f"{obj:.17g}"
    if isinstance(obj, int):
        return str(obj)
    escaped = str(obj).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def write_json(path, obj: Any) -> None:
    with open(path, "w") as fh:
        fh.write(_json_render(obj, 0) + "\n")


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
