"""Portable tensor files.

Single-tensor ".feat" files carry one row-major float32 array:

    magic "FEAT" | u32 version=1 | u32 rank | rank x u32 dims | payload

All integers and floats are little-endian. Checkpoint files bundle several
named tensors, each serialized as an embedded .feat blob:

    magic "FSEC" | u32 version=1 | u32 count
    count x ( u32 name_len | name utf-8 | feat blob )
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import LoadError

FEAT_MAGIC = b"FEAT"
SECTION_MAGIC = b"FSEC"
VERSION = 1


def feat_bytes(array: np.ndarray) -> bytes:
    a = np.ascontiguousarray(array, dtype="<f4")
    header = FEAT_MAGIC + struct.pack("<II", VERSION, a.ndim)
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    return header + a.tobytes()


def parse_feat_bytes(data: bytes, name: str = "<bytes>") -> np.ndarray:
    array, offset = _parse_feat_at(data, 0, name)
    if offset != len(data):
        raise LoadError(f"{name}: {len(data) - offset} trailing bytes after payload")
    return array


def _parse_feat_at(data: bytes, offset: int, name: str) -> tuple[np.ndarray, int]:
    if len(data) < offset + 12:
        raise LoadError(f"{name}: truncated header, need 12 bytes at offset {offset}")
    if data[offset : offset + 4] != FEAT_MAGIC:
        raise LoadError(f"{name}: bad magic {data[offset:offset + 4]!r}")
    version, rank = struct.unpack_from("<II", data, offset + 4)
    if version != VERSION:
        raise LoadError(f"{name}: unsupported version {version}")
    offset += 12
    if len(data) < offset + 4 * rank:
        raise LoadError(f"{name}: truncated dimension list (rank {rank})")
    dims = struct.unpack_from(f"<{rank}I", data, offset)
    offset += 4 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    payload = 4 * count
    if len(data) < offset + payload:
        missing = offset + payload - len(data)
        raise LoadError(f"{name}: truncated payload, {missing} bytes missing")
    array = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
    return array.reshape(dims).copy(), offset + payload


def write_feat(path, array: np.ndarray) -> None:
    atomic_write_bytes(path, feat_bytes(array))


def read_feat(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    return parse_feat_bytes(data, str(path))


def write_sections(path, tensors: dict[str, np.ndarray]) -> None:
    out = SECTION_MAGIC + struct.pack("<II", VERSION, len(tensors))
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        out += struct.pack("<I", len(encoded)) + encoded + feat_bytes(array)
    atomic_write_bytes(path, out)


def read_sections(path) -> dict[str, np.ndarray]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    if len(data) < 12 or data[:4] != SECTION_MAGIC:
        raise LoadError(f"{path}: not a section file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise LoadError(f"{path}: unsupported version {version}")
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        tensors[name], offset = _parse_feat_at(data, offset, f"{path}:{name}")
    return tensors


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file and rename so readers never see partial files."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
