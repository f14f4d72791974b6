"""Flat binary parameter files.

Layout: the magic bytes ``TCF1`` followed by one record per tensor until end
of file. A record is ``name_len:u32, name:utf-8, rank:u32, dims:u32*rank``
and then the row-major little-endian float64 payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..core import ParseError

MAGIC = b"TCF1"


def dumps(tensors: dict[str, np.ndarray]) -> bytes:
    chunks = [MAGIC]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)) + raw)
        chunks.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    return b"".join(chunks)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise ParseError("not a TCF1 parameter file")
    out: dict[str, np.ndarray] = {}
    pos = 4
    try:
        while pos < len(blob):
            (name_len,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            nbytes = 8 * count
            if pos + nbytes > len(blob):
                raise ParseError(f"truncated payload for tensor {name!r}")
            out[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(dims).astype(np.float64)
            pos += nbytes
    except struct.error as exc:
        raise ParseError(f"truncated parameter file ({exc})") from None
    return out


def save(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(tensors))


def load(path: str | Path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
