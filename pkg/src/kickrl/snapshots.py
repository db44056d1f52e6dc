"""Named-array snapshot container: the demo-store JSONL idiom for parameters.

Line 1 is a header with free-form metadata; every following line carries one
flat real array with its name and shape.  Used for network and encoder
parameter snapshots.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import FormatError

FORMAT_VERSION = 1


def save_arrays(path: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "named-arrays",
        "names": list(arrays),
        "meta": meta or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            row = {
                "name": name,
                "shape": list(arr.shape),
                "data": [float(v) for v in arr.reshape(-1)],
            }
            fh.write(json.dumps(row) + "\n")


def load_arrays(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("line 1: missing header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"line 1: not valid JSON ({exc})") from None
    if header.get("format_version") != FORMAT_VERSION or header.get("kind") != "named-arrays":
        raise FormatError("line 1: not a named-array snapshot")
    expected = list(header.get("names", []))

    arrays: dict[str, np.ndarray] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        try:
            row = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: not valid JSON ({exc})") from None
        if set(row) != {"name", "shape", "data"}:
            raise FormatError(f"line {lineno}: array fields wrong")
        arr = np.asarray(row["data"], dtype=np.float64)
        shape = tuple(int(s) for s in row["shape"])
        if arr.size != (int(np.prod(shape)) if shape else 1):
            raise FormatError(f"line {lineno}: data length does not match shape")
        arrays[str(row["name"])] = arr.reshape(shape)
    if list(arrays) != expected:
        raise FormatError(
            f"array names {list(arrays)} do not match header names {expected}"
        )
    return arrays, dict(header.get("meta", {}))
