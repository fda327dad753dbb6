"""Flat binary parameter checkpoints.

Layout: magic ``NXSG``, format version (u32 LE), then one record per
tensor: name length (u32 LE), UTF-8 name, rank (u32 LE), dims (u64 LE
each), raw little-endian float64 values in row-major order.  Records run
to end of file.  Round-trips are bit-exact.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"NXSG"
VERSION = 1


def save_checkpoint(path, params: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, value in params.items():
            arr = np.asarray(value, dtype=np.float64)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(arr.astype("<f8", copy=False).tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated checkpoint while reading {what}")
    return buf


def load_checkpoint(path) -> dict:
    params = {}
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        version, = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise FormatError("truncated checkpoint while reading name length")
            name_len, = struct.unpack("<I", head)
            name = _read_exact(f, name_len, "name").decode("utf-8")
            rank, = struct.unpack("<I", _read_exact(f, 4, "rank"))
            dims = [struct.unpack("<Q", _read_exact(f, 8, "dims"))[0]
                    for _ in range(rank)]
            count = 1
            for d in dims:
                count *= d
            raw = _read_exact(f, 8 * count, f"values of {name!r}")
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
    return params
