"""LWA1 array container and the model file format built on top of it.

Layout: magic ``LWA1``, then little-endian u32 fields version, dtype
(0 = float32, 1 = uint32), height, width, channels, then the row-major
payload with channels innermost.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"LWA1"
VERSION = 1
FLOAT32, UINT32 = 0, 1
_HEADER = struct.Struct("<4s5I")
_DTYPES = {FLOAT32: np.dtype("<f4"), UINT32: np.dtype("<u4")}

MODEL_MAGIC = "LWMODEL 1"


class FormatError(ValueError):
    pass


def encode(array, dtype: int = FLOAT32) -> bytes:
    arr = np.asarray(array)
    if arr.ndim == 1:
        arr = arr[None, :, None]
    elif arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected 1-3 dims, got shape {arr.shape}")
    if dtype not in _DTYPES:
        raise ValueError(f"unknown dtype code {dtype}")
    if dtype == UINT32 and arr.size and (arr.min() < 0 or arr.max() > 0xFFFFFFFF):
        raise ValueError("values out of uint32 range")
    h, w, c = arr.shape
    payload = np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes()
    return _HEADER.pack(MAGIC, VERSION, dtype, h, w, c) + payload


def decode(buf: bytes) -> tuple[np.ndarray, int]:
    """Return the (H, W, C) array and its dtype code."""
    if len(buf) < _HEADER.size:
        raise FormatError("truncated LWA1 header")
    magic, version, dtype, h, w, c = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported LWA1 version {version}")
    if dtype not in _DTYPES:
        raise FormatError(f"unknown dtype code {dtype}")
    n = h * w * c
    expected = _HEADER.size + n * 4
    if len(buf) != expected:
        raise FormatError(f"payload size mismatch: {len(buf)} bytes, expected {expected}")
    arr = np.frombuffer(buf, dtype=_DTYPES[dtype], offset=_HEADER.size, count=n)
    return arr.reshape(h, w, c).copy(), dtype


def save(path, array, dtype: int = FLOAT32):
    Path(path).write_bytes(encode(array, dtype))


def load(path) -> np.ndarray:
    arr, _ = decode(Path(path).read_bytes())
    return arr


def validate(path) -> bool:
    try:
        decode(Path(path).read_bytes())
    except (FormatError, OSError):
        return False
    return True


def save_model(path, header: dict, theta: np.ndarray):
    lines = [MODEL_MAGIC] + [f"{k}={v}" for k, v in header.items()] + ["END"]
    text = "\n".join(lines) + "\n"
    Path(path).write_bytes(text.encode("ascii") + encode(np.asarray(theta, dtype=np.float64)))


def load_model(path) -> tuple[dict, np.ndarray]:
    buf = Path(path).read_bytes()
    end = buf.find(b"\nEND\n")
    if not buf.startswith(MODEL_MAGIC.encode()) or end < 0:
        raise FormatError(f"{path}: not a model file")
    header = {}
    for line in buf[:end].decode("ascii").splitlines()[1:]:
        key, _, value = line.partition("=")
        header[key] = value
    arr, dtype = decode(buf[end + len(b"\nEND\n"):])
    if dtype != FLOAT32:
        raise FormatError(f"{path}: model payload must be float32")
    return header, arr.ravel().astype(np.float64)
