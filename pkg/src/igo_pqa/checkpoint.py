"""Versioned checkpoint files for named tensor collections.

Layout: an 8-byte magic (format + version), a little-endian uint64
header length, a JSON header describing each tensor {name, shape,
dtype, offset, nbytes}, then one flat little-endian value blob.
Offsets are relative to the blob start.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError, MissingFile

MAGIC = b"PQACKPT\x01"

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def save_checkpoint(tensors: dict, path, extra: dict = None) -> None:
    """Write a {name: ndarray} mapping; ``extra`` rides along as JSON."""
    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        # asarray, not ascontiguousarray: the latter promotes 0-d to 1-d
        arr = np.asarray(tensors[name])
        if arr.dtype == np.float32:
            code = "<f4"
        elif arr.dtype == np.float64:
            code = "<f8"
        else:
            raise CheckpointError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
        raw = arr.astype(_DTYPES[code]).tobytes(order="C")
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": code,
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"tensors": entries, "extra": extra or {}}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path, with_extra=False):
    """Read a checkpoint back into {name: ndarray} (plus extra if asked)."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    (header_len,) = struct.unpack_from("<Q", raw, len(MAGIC))
    header_start = len(MAGIC) + 8
    blob_start = header_start + header_len
    if blob_start > len(raw):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[header_start:blob_start].decode("utf-8"))
        entries = header["tensors"]
    except (json.JSONDecodeError, UnicodeDecodeError, KeyError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
    tensors = {}
    for entry in entries:
        try:
            name = entry["name"]
            dtype = _DTYPES[entry["dtype"]]
            shape = tuple(entry["shape"])
            start = blob_start + entry["offset"]
            stop = start + entry["nbytes"]
        except KeyError as exc:
            raise CheckpointError(f"{path}: bad tensor entry: {exc}") from exc
        if stop > len(raw):
            raise CheckpointError(f"{path}: truncated blob for tensor {name!r}")
        tensors[name] = np.frombuffer(raw[start:stop], dtype=dtype).reshape(shape).copy()
    if with_extra:
        return tensors, header.get("extra", {})
    return tensors
