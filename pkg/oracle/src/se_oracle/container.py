"""Writer/reader for the engine's binary tensor container.

Deliberately re-implemented from the wire-format description rather than
shared with the engine, so the two sides cross-check each other:

    magic "FENH" | u32 version=1 | u32 blob_len | canonical-JSON blob |
    u32 tensor_count | per tensor: u16 name_len, name, u8 dtype (0=f32),
    u8 ndim, u32 x ndim dims, float32 little-endian payload
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"FENH"
VERSION = 1


def canonical_blob(blob: dict) -> bytes:
    return json.dumps(blob, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(path, blob: dict, tensors: dict[str, np.ndarray]) -> bytes:
    data = encode(blob, tensors)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def encode(blob: dict, tensors: dict[str, np.ndarray]) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<I", VERSION)
    blob_bytes = canonical_blob(blob)
    out += struct.pack("<I", len(blob_bytes))
    out += blob_bytes
    out += struct.pack("<I", len(tensors))
    for name, tensor in tensors.items():
        tensor = np.ascontiguousarray(tensor, dtype=np.float32)
        name_bytes = name.encode("utf-8")
        out += struct.pack("<H", len(name_bytes))
        out += name_bytes
        out += struct.pack("<BB", 0, tensor.ndim)
        for dim in tensor.shape:
            out += struct.pack("<I", dim)
        out += tensor.astype("<f4", copy=False).tobytes()
    return bytes(out)


def decode(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if data[:4] != MAGIC:
        raise ValueError("bad magic")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    (blob_len,) = struct.unpack_from("<I", data, 8)
    offset = 12
    blob = json.loads(data[offset : offset + blob_len].decode("utf-8"))
    offset += blob_len
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        dtype, ndim = struct.unpack_from("<BB", data, offset)
        offset += 2
        if dtype != 0:
            raise ValueError(f"{name}: unsupported dtype {dtype}")
        dims = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        n_bytes = 4
        for d in dims:
            n_bytes *= d
        tensors[name] = (
            np.frombuffer(data[offset : offset + n_bytes], dtype="<f4").reshape(dims).copy())
        offset += n_bytes
    if offset != len(data):
        raise ValueError("trailing bytes")
    return blob, tensors


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        return decode(fh.read())
