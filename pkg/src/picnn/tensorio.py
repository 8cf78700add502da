"""Binary tensor snapshots.

Layout (all integers little-endian u32):

    magic "PTNS" | version=1 | dtype tag | ndim | dims... | payload

dtype tag 1 = float64, 2 = float32; payload is row-major little-endian.
Round-trips are bit-exact, which the deterministic-rerun machinery
depends on.
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = ["save_tensor", "load_tensor", "TensorFormatError"]

_MAGIC = b"PTNS"
_VERSION = 1
_TAG_OF_DTYPE = {np.dtype(np.float64): 1, np.dtype(np.float32): 2}
_DTYPE_OF_TAG = {1: np.dtype("<f8"), 2: np.dtype("<f4")}


class TensorFormatError(IOError):
    """Malformed or truncated tensor file."""


def save_tensor(path, array):
    arr = np.asarray(array)
    if arr.ndim >= 1 and not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr)
    tag = _TAG_OF_DTYPE.get(arr.dtype)
    if tag is None:
        raise TensorFormatError(f"unsupported dtype {arr.dtype}; use float32/float64")
    if arr.ndim > 0 and max(arr.shape, default=0) >= 2 ** 32:
        raise TensorFormatError("dimension does not fit in u32")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<III", _VERSION, tag, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def load_tensor(path):
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16 or blob[:4] != _MAGIC:
        raise TensorFormatError(f"{path}: not a PTNS tensor file")
    version, tag, ndim = struct.unpack_from("<III", blob, 4)
    if version != _VERSION:
        raise TensorFormatError(f"{path}: unsupported version {version}")
    dtype = _DTYPE_OF_TAG.get(tag)
    if dtype is None:
        raise TensorFormatError(f"{path}: unknown dtype tag {tag}")
    header_end = 16 + 4 * ndim
    if len(blob) < header_end:
        raise TensorFormatError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{ndim}I", blob, 16)
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    expected = header_end + count * dtype.itemsize
    if len(blob) != expected:
        raise TensorFormatError(f"{path}: payload size {len(blob) - header_end} "
                                f"!= expected {count * dtype.itemsize}")
    arr = np.frombuffer(blob[header_end:], dtype=dtype, count=count).reshape(shape)
    return arr.astype(dtype.newbyteorder("="), copy=True)
