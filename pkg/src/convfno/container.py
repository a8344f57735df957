"""NOPD container: a JSON header followed by a raw little-endian array.

Layout::

    b"NOPD" | u32 version (=1) | u32 header length | header (UTF-8 JSON) | payload

The header carries ``dtype`` ("f64" or "f32") and ``shape``; the payload is
the row-major array.  Headers are written with sorted keys so identical
inputs give identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NOPD"
VERSION = 1
_DTYPES = {"f64": "<f8", "f32": "<f4"}


class ContainerError(ValueError):
    pass


def encode_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def write(path, array: np.ndarray, header: dict | None = None, dtype: str = "f64") -> Path:
    if dtype not in _DTYPES:
        raise ContainerError(f"dtype must be one of {sorted(_DTYPES)}")
    arr = np.asarray(array)
    if np.iscomplexobj(arr):
        raise ContainerError("complex arrays must be split into real pairs before writing")
    hdr = dict(header or {})
    hdr["dtype"] = dtype
    hdr["shape"] = [int(n) for n in arr.shape]
    raw = encode_header(hdr)
    payload = np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(raw)) + raw + payload)
    return path


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        head = fh.read(12)
        return _parse_prefix(head, fh.read, path)[0]


def _parse_prefix(head: bytes, read_more, path):
    if len(head) < 12 or head[:4] != MAGIC:
        raise ContainerError(f"{path}: not a NOPD container")
    version, n = struct.unpack("<II", head[4:12])
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    raw = read_more(n)
    if len(raw) != n:
        raise ContainerError(f"{path}: truncated header")
    header = json.loads(raw.decode("utf-8"))
    if header.get("dtype") not in _DTYPES or not isinstance(header.get("shape"), list):
        raise ContainerError(f"{path}: header lacks a valid dtype/shape")
    return header, 12 + n


def read(path) -> tuple[np.ndarray, dict]:
    data = Path(path).read_bytes()
    pos = [12]

    def more(n):
        chunk = data[pos[0]:pos[0] + n]
        pos[0] += n
        return chunk

    header, offset = _parse_prefix(data[:12], more, path)
    dt = np.dtype(_DTYPES[header["dtype"]])
    shape = tuple(header["shape"])
    count = int(np.prod(shape, dtype=np.int64))
    if len(data) - offset != count * dt.itemsize:
        raise ContainerError(f"{path}: payload holds {len(data) - offset} bytes, header implies {count * dt.itemsize}")
    arr = np.frombuffer(data, dtype=dt, count=count, offset=offset).reshape(shape)
    return arr.astype(np.float64), header


def fingerprint(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()[:16]
