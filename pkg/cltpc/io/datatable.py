# cltpc/io/datatable.py
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from typing import List

import numpy as np

from ..data.bitmatrix import BitMatrix
from ..errors import DataError, EmptyFile, MalformedRow, ManifestMismatch

logger = logging.getLogger(__name__)


_ZERO, _ONE, _COMMA = ord("0"), ord("1"), ord(",")


def _parse_line(raw: bytes, width: int | None, line: int, path: str) -> np.ndarray:
    b = np.frombuffer(raw, dtype=np.uint8)
    # fast path: "d,d,...,d" with single-character tokens
    if b.size % 2 == 1 and (b[1::2] == _COMMA).all():
        digits = b[0::2]
        if ((digits == _ZERO) | (digits == _ONE)).all():
            if width is not None and digits.size != width:
                raise MalformedRow(line, f"expected {width} tokens, got {digits.size}", path)
            return digits - _ZERO
    tokens = [t.strip() for t in raw.decode("ascii", errors="replace").split(",")]
    if width is not None and len(tokens) != width:
        raise MalformedRow(line, f"expected {width} tokens, got {len(tokens)}", path)
    for j, tok in enumerate(tokens):
        if tok not in ("0", "1"):
            raise MalformedRow(line, f"token {tok!r} in column {j} is not 0 or 1", path)
    return np.array([int(t) for t in tokens], dtype=np.uint8)


def load_binary_csv(path: str) -> BitMatrix:
    """Headerless CSV of 0/1 tokens, LF or CRLF line endings."""
    with open(path, "rb") as f:
        lines = f.read().splitlines()
    # trailing blank lines are not rows
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise EmptyFile(path)

    first = _parse_line(lines[0], None, 1, path)
    A = np.empty((len(lines), first.size), dtype=np.uint8)
    A[0] = first
    for line, raw in enumerate(lines[1:], start=2):
        A[line - 1] = _parse_line(raw, first.size, line, path)

    data = BitMatrix.from_array(A)
    logger.info("loaded %s: N=%d V=%d", path, data.rows, data.cols)
    return data


def save_binary_csv(path: str, data: BitMatrix) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerows(data.to_array().tolist())


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------- dataset manifest ----------

@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: str  # absolute, resolved against the manifest's directory
    n: int
    v: int
    sha256: str | None = None


def load_manifest(path: str) -> List[ManifestEntry]:
    try:
        with open(path, "r") as f:
            meta = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: manifest is not valid JSON: {e}")

    base = os.path.dirname(os.path.abspath(path))
    entries = []
    for i, item in enumerate(meta.get("datasets", [])):
        try:
            entries.append(ManifestEntry(
                name=str(item["name"]),
                path=os.path.join(base, str(item["path"])),
                n=int(item["n"]),
                v=int(item["v"]),
                sha256=item.get("sha256"),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path}: dataset entry {i} is incomplete: {e}")
    return entries


def verify_entry(entry: ManifestEntry) -> BitMatrix:
    """Load the entry's file and check checksum, N and V against the manifest."""
    if entry.sha256:
        digest = file_sha256(entry.path)
        if digest != entry.sha256:
            raise ManifestMismatch(entry.name, "sha256", entry.sha256, digest)
    data = load_binary_csv(entry.path)
    if data.rows != entry.n:
        raise ManifestMismatch(entry.name, "N", entry.n, data.rows)
    if data.cols != entry.v:
        raise ManifestMismatch(entry.name, "V", entry.v, data.cols)
    return data
