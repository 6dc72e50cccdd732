"""Flat binary checkpoint format.

Layout (all little-endian): 4-byte magic ``HCR1``, u32 tensor count, then
per tensor sorted by name: u16 name length, UTF-8 name, u8 rank, u32 dims,
raw float64 payload. Writing is deterministic, so identical parameter
sets produce byte-identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

MAGIC = b"HCR1"


class CheckpointError(Exception):
    """Malformed or truncated checkpoint file."""


def save_tensors(path: Union[str, Path], tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes(order="C"))


def load_tensors(path: Union[str, Path]) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad magic in {path}: {blob[:4]!r}")
    offset = 4

    def take(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise CheckpointError(f"truncated checkpoint {path}")
        vals = struct.unpack_from(fmt, blob, offset)
        offset += size
        return vals

    (count,) = take("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = take("<H")
        if offset + name_len > len(blob):
            raise CheckpointError(f"truncated checkpoint {path}")
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = take("<B")
        shape = tuple(take(f"<{rank}I")) if rank else ()
        n_items = int(np.prod(shape)) if shape else 1
        nbytes = 8 * n_items
        if offset + nbytes > len(blob):
            raise CheckpointError(f"truncated checkpoint {path}")
        data = np.frombuffer(blob, dtype="<f8", count=n_items, offset=offset)
        offset += nbytes
        tensors[name] = data.reshape(shape).astype(np.float64)
    if offset != len(blob):
        raise CheckpointError(f"trailing bytes in checkpoint {path}")
    return tensors
