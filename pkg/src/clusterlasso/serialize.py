"""JSON helpers shared by the sampling and experiment modules.

Matrices are embedded as base64-encoded little-endian float64 bytes in
row-major order, with explicit shape fields, so records round-trip bitwise
across platforms. Floats inside plain JSON values rely on Python's
shortest-round-trip ``repr`` and therefore also reproduce exactly.
"""

from __future__ import annotations

import base64
import json

import numpy as np

SCHEMA_VERSION = 1


def encode_array(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode(
        "ascii"
    )


def decode_array(data: str, shape) -> np.ndarray:
    buf = base64.b64decode(data.encode("ascii"))
    return np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def check_schema(doc: dict, kind: str) -> None:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported schema_version {doc.get('schema_version')!r} "
            f"(expected {SCHEMA_VERSION})"
        )
    if doc.get("kind") != kind:
        raise ValueError(f"expected a {kind!r} record, got {doc.get('kind')!r}")
