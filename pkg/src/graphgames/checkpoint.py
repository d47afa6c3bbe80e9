"""Flat binary checkpoints for named parameters.

Layout: header = magic ``GGL1`` + little-endian u32 version, then one
record per parameter: u32 name length, UTF-8 name, u32 rank, u32 dims,
row-major little-endian float64 values, mask bits packed LSB-first
(all-ones byte padding when no mask).
"""

from __future__ import annotations

import struct

import numpy as np

from .autodiff import Parameter

MAGIC = b"GGL1"
VERSION = 1


class CheckpointFormatError(ValueError):
    """Blob does not parse as a parameter checkpoint."""


def dump_params(named_params) -> bytes:
    """Serialize [(name, Parameter)] to the blob format."""
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    for name, p in named_params:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", p.value.ndim))
        chunks.append(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
        chunks.append(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
        mask = p.mask if p.mask is not None else np.ones(p.value.shape, dtype=bool)
        chunks.append(np.packbits(mask.reshape(-1), bitorder="little").tobytes())
    return b"".join(chunks)


def parse_blob(blob: bytes) -> dict:
    """Parse a blob into {name: (values, mask)}."""
    if blob[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported version {version}")
    pos = 8
    out = {}
    while pos < len(blob):
        (nlen,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        values = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += 8 * count
        nbytes = (count + 7) // 8
        bits = np.frombuffer(blob, dtype=np.uint8, count=nbytes, offset=pos)
        mask = np.unpackbits(bits, bitorder="little")[:count].astype(bool).reshape(shape)
        pos += nbytes
        out[name] = (values.astype(np.float64), mask)
    return out


def load_params(blob: bytes, named_params) -> None:
    """Restore values in place; shapes and mask patterns must match."""
    parsed = parse_blob(blob)
    for name, p in named_params:
        if name not in parsed:
            raise CheckpointFormatError(f"checkpoint missing parameter {name!r}")
        values, mask = parsed[name]
        if values.shape != p.value.shape:
            raise CheckpointFormatError(
                f"{name}: shape {values.shape} != expected {p.value.shape}")
        own_mask = p.mask if p.mask is not None else np.ones(p.value.shape, dtype=bool)
        if not np.array_equal(mask, own_mask):
            raise CheckpointFormatError(f"{name}: mask pattern mismatch")
        p.value[:] = values
