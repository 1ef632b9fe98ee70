# cltpc/io/documents.py
from __future__ import annotations

import json
import math
from datetime import datetime, timezone
from typing import Dict

from ..config import APP_VERSION, FORMAT_VERSION
from ..errors import FormatVersionMismatch, ModelError

NEG_INF_TOKEN = "-inf"


def encode_float(x: float):
    """Finite floats stay JSON numbers (repr is round-trip exact); -inf becomes "-inf"."""
    x = float(x)
    if x == -math.inf:
        return NEG_INF_TOKEN
    if not math.isfinite(x):
        raise ModelError(f"cannot store non-finite value {x!r}")
    return x


def decode_float(v) -> float:
    if v == NEG_INF_TOKEN:
        return -math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelError(f"expected a number or {NEG_INF_TOKEN!r}, got {v!r}")
    # json.load accepts NaN and Infinity literals; only "-inf" is a valid non-finite value
    if not math.isfinite(v):
        raise ModelError(f"non-finite value {v!r} in model document")
    return float(v)


def encode_floats(values) -> list:
    return [encode_float(x) for x in values]


def decode_floats(values) -> list[float]:
    return [decode_float(x) for x in values]


def write_document(path: str, kind: str, body: Dict[str, object]) -> None:
    meta: Dict[str, object] = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "app_version": APP_VERSION,
        "saved_at": datetime.now(timezone.utc).isoformat(),
    }
    meta.update(body)
    with open(path, "w") as f:
        json.dump(meta, f, indent=1, allow_nan=False)


def read_document(path: str, kind: str | None = None) -> Dict[str, object]:
    with open(path, "r") as f:
        try:
            meta = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelError(f"{path}: not a valid model document: {e}")
    if not isinstance(meta, dict):
        raise ModelError(f"{path}: not a valid model document")
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(version, FORMAT_VERSION)
    if kind is not None and meta.get("kind") != kind:
        raise ModelError(f"{path}: expected a {kind!r} document, found {meta.get('kind')!r}")
    return meta
