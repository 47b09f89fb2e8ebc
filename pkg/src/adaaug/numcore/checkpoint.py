"""Flat binary container for named float64 tensors.

Layout, all integers little-endian:
    magic "ADAAUG01" | version u32 | count u32
    per tensor: name_len u32 | name utf-8 | rank u64 | extents u64 each | f64 payload
Tensor order is preserved on round-trip.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

CHECKPOINT_MAGIC = b"ADAAUG01"
CHECKPOINT_VERSION = 1


def save_tensors(path, tensors: dict):
    """Write {name: ndarray} to path in the container format."""
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(tensors))]
    for name, tensor in tensors.items():
        arr = np.ascontiguousarray(tensor, dtype=np.float64)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<Q", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_tensors(path) -> dict:
    """Read the container back into an ordered {name: ndarray} dict."""
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise CheckpointError(f"truncated checkpoint header at offset {len(blob)} in {path}")
    if blob[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic {blob[:8]!r} at offset 0 in {path}")
    version, count = struct.unpack_from("<II", blob, 8)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} at offset 8 in {path}")
    offset = 16
    out = {}
    for _ in range(count):
        offset, name_len = _take(blob, offset, "<I", path)
        name_end = offset + name_len
        if name_end > len(blob):
            raise CheckpointError(f"truncated tensor name at offset {offset} in {path}")
        name = blob[offset:name_end].decode("utf-8")
        offset = name_end
        offset, rank = _take(blob, offset, "<Q", path)
        shape = []
        for _ in range(rank):
            offset, extent = _take(blob, offset, "<Q", path)
            shape.append(extent)
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
        end = offset + nbytes
        if end > len(blob):
            raise CheckpointError(
                f"truncated payload for {name!r} at offset {offset} in {path}"
            )
        out[name] = (
            np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        )
        offset = end
    if offset != len(blob):
        raise CheckpointError(f"trailing bytes at offset {offset} in {path}")
    return out


def _take(blob: bytes, offset: int, fmt: str, path):
    size = struct.calcsize(fmt)
    if offset + size > len(blob):
        raise CheckpointError(f"truncated checkpoint at offset {offset} in {path}")
    (value,) = struct.unpack_from(fmt, blob, offset)
    return offset + size, value
