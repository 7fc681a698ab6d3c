"""Logit file I/O: the LGT1 binary container and JSON lines.

LGT1 layout (little-endian): magic ``b"LGT1"``, u16 version (1), u32 count,
u32 n, then ``count * n`` float32 values, row-major.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, NonFiniteError

MAGIC = b"LGT1"
VERSION = 1
HEADER = struct.Struct("<4sHII")


def encode_lgt1(vectors) -> bytes:
    arr = np.asarray(vectors, dtype="<f4")
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("LGT1 holds a 2-D array of equal-length vectors")
    count, n = arr.shape
    return HEADER.pack(MAGIC, VERSION, count, n) + arr.tobytes(order="C")


def write_lgt1(path, vectors) -> None:
    Path(path).write_bytes(encode_lgt1(vectors))


def decode_lgt1(data: bytes) -> np.ndarray:
    if len(data) < HEADER.size:
        raise FormatError(f"header needs {HEADER.size} bytes, file has {len(data)}", offset=len(data))
    magic, version, count, n = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    expected = HEADER.size + 4 * count * n
    if len(data) < expected:
        raise FormatError(f"payload truncated: need {expected - HEADER.size} bytes, have {len(data) - HEADER.size}",
                          offset=len(data))
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after payload", offset=expected)
    arr = np.frombuffer(data, dtype="<f4", count=count * n, offset=HEADER.size).reshape(count, n)
    return arr.astype(np.float64)


def decode_jsonl(data: bytes) -> list[np.ndarray]:
    out = []
    offset = 0
    for line in data.splitlines(keepends=True):
        text = line.strip()
        if text:
            try:
                vals = json.loads(text)
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise FormatError(f"invalid JSON on line {len(out) + 1}: {exc}", offset=offset) from exc
            if not isinstance(vals, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                raise FormatError("each line must be a JSON array of numbers", offset=offset)
            out.append(np.asarray(vals, dtype=np.float64))
        offset += len(line)
    return out


def _validate(vectors) -> None:
    for i, v in enumerate(vectors):
        if not np.all(np.isfinite(v)):
            raise NonFiniteError(f"vector {i} has non-finite entries", index=i)


def ingest(path) -> list[np.ndarray]:
    """Read an LGT1 file or JSON lines (detected by the magic) into float64 vectors."""
    data = Path(path).read_bytes()
    vectors = list(decode_lgt1(data)) if data[:4] == MAGIC else decode_jsonl(data)
    _validate(vectors)
    return vectors


def write_jsonl(path, vectors) -> None:
    with open(path, "w") as fh:
        for v in vectors:
            fh.write(json.dumps([float(a) for a in np.asarray(v).ravel()]) + "\n")
