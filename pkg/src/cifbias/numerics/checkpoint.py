"""Binary checkpoint format: magic CFBP, version, then named float64 tensors.

Layout, all little-endian:
    "CFBP" | u32 version | u32 tensor count
    per tensor: u32 name length | UTF-8 name | u32 rank | u32 dims... | f64 payload
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CFBP"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_params(path, params: dict[str, np.ndarray]) -> None:
    """Write named tensors in dict order; float64 little-endian payloads."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(params)))
        for name, arr in params.items():
            a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", a.ndim))
            if a.ndim:
                f.write(struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(a.tobytes(order="C"))


def load_params(path) -> dict[str, np.ndarray]:
    """Read a CFBP file back into {name: float64 array}, preserving order."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a CFBP checkpoint")
    off = 4
    version, count = struct.unpack_from("<II", raw, off)
    off += 8
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported CFBP version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", raw, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", raw, off) if rank else ()
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        a = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(dims)
        off += 8 * n
        out[name] = a.astype(np.float64)
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")
    return out
