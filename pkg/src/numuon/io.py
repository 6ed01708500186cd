"""Checkpoint container and metrics stream formats.

Checkpoint layout::

    SPOPT1\\n
    <header byte length, decimal ASCII>\\n
    <header: UTF-8 JSON>
    <payload: float64 little-endian, blocks in header order>

The header lists every block with its name, shape and ``factored`` flag. A
factored block stores ``Wu`` (d_out x k) then ``Wv`` (d_in x k), both
row-major. ``meta`` carries free-form run information (model layout, plan).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .compression import LowRankFactors
from .errors import FormatError

MAGIC = b"SPOPT1"
DTYPE = "<f8"


def write_checkpoint(path, blocks: dict, meta: dict | None = None) -> None:
    entries = []
    payloads = []
    for name, value in blocks.items():
        if isinstance(value, LowRankFactors):
            d_out, d_in = value.shape
            entries.append({"name": name, "shape": [d_out, d_in], "factored": True, "rank": value.k})
            payloads += [value.Wu, value.Wv]
        else:
            arr = np.asarray(value, dtype=np.float64)
            entries.append({"name": name, "shape": list(arr.shape), "factored": False})
            payloads.append(arr)
    header = json.dumps({"dtype": DTYPE, "blocks": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(str(len(header)).encode("ascii") + b"\n")
        fh.write(header)
        for arr in payloads:
            fh.write(np.ascontiguousarray(arr, dtype=DTYPE).tobytes())


def read_checkpoint(path) -> tuple[dict, dict]:
    """Return ``(blocks, meta)``; factored blocks come back as :class:`LowRankFactors`."""
    data = Path(path).read_bytes()
    try:
        magic, rest = data.split(b"\n", 1)
        length, rest = rest.split(b"\n", 1)
        n = int(length)
        header = json.loads(rest[:n].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header ({exc})") from exc
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic[:16]!r}")
    if header.get("dtype") != DTYPE:
        raise FormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    payload = memoryview(rest)[n:]
    offset = 0

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(payload):
            raise FormatError(f"{path}: payload truncated")
        arr = np.frombuffer(payload[offset : offset + nbytes], dtype=DTYPE).astype(np.float64).reshape(shape)
        offset += nbytes
        return arr

    blocks = {}
    try:
        for entry in header["blocks"]:
            shape = tuple(entry["shape"])
            if entry.get("factored"):
                k = int(entry["rank"])
                Wu = take((shape[0], k))
                Wv = take((shape[1], k))
                blocks[entry["name"]] = LowRankFactors(Wu, Wv)
            else:
                blocks[entry["name"]] = take(shape)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed block entry ({exc})") from exc
    if offset != len(payload):
        raise FormatError(f"{path}: {len(payload) - offset} trailing bytes")
    return blocks, header.get("meta", {})


def record_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=True) + "\n"


def read_metrics(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{i + 1}: {exc}") from exc
    return records
