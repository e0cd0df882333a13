"""JSON and file-writing plumbing shared by checkpoints, reports, and CSVs.

Floats are rendered with 17 significant digits (``%.17g``), which round-trips
every float64 exactly, so save -> load -> save is byte-identical.  All writes
go through a temp-file-plus-rename so readers never observe partial output.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Any

import numpy as np


def format_float(x: float) -> str:
    """17-significant-digit decimal rendering of a finite float."""
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return format(float(x), ".17g")


def dumps(value: Any, indent: int = 0) -> str:
    """Serialize to JSON with deterministic float formatting.

    Dict insertion order is preserved (callers control key order).  Accepts
    numpy scalars and arrays (arrays become nested lists).
    """
    out: list[str] = []
    _emit(value, out, indent, 0)
    out.append("\n")
    return "".join(out)


def _emit(value: Any, out: list[str], indent: int, depth: int) -> None:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, (np.integer,)):
        value = int(value)
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, dict):
        _emit_container(value.items(), out, indent, depth, "{", "}", keys=True)
    elif isinstance(value, (list, tuple)):
        _emit_container(value, out, indent, depth, "[", "]", keys=False)
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def _emit_container(items, out, indent, depth, open_ch, close_ch, keys):
    items = list(items)
    if not items:
        out.append(open_ch + close_ch)
        return
    pad = " " * (indent * (depth + 1)) if indent else ""
    close_pad = " " * (indent * depth) if indent else ""
    sep = ",\n" if indent else ","
    nl = "\n" if indent else ""
    out.append(open_ch + nl)
    for i, item in enumerate(items):
        out.append(pad)
        if keys:
            key, val = item
            if not isinstance(key, str):
                raise TypeError("JSON object keys must be strings")
            out.append(json.dumps(key))
            out.append(": " if indent else ":")
            _emit(val, out, indent, depth + 1)
        else:
            _emit(item, out, indent, depth + 1)
        if i < len(items) - 1:
            out.append(sep)
    out.append(nl + close_pad + close_ch)


def atomic_write_text(path: str, text: str) -> None:
    """Write via temp file + rename in the destination directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
