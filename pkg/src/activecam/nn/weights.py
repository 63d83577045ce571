"""Portable weight file: text manifest plus little-endian float32 blob.

Layout:
    ACWEIGHTS1\n
    tensor <name> <d0>x<d1>x... f32 <byte offset> <byte length>\n   (repeated)
    crc32 <8 hex digits>\n
    ---\n
    <raw blob: float32 little-endian, tensors concatenated in manifest order>
"""

from __future__ import annotations

import os
import zlib

import numpy as np

MAGIC = b"ACWEIGHTS1"
SEPARATOR = b"---\n"


class WeightsError(ValueError):
    pass


def save_weights(params: dict[str, np.ndarray], path: str | os.PathLike) -> None:
    """Serialize named tensors; load_weights restores them bit-exactly."""
    blobs = []
    manifest_lines = [MAGIC.decode() ]
    offset = 0
    for name, arr in params.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        shape = "x".join(str(d) for d in arr.shape) if arr.shape else "1"
        manifest_lines.append(f"tensor {name} {shape} f32 {offset} {len(data)}")
        blobs.append(data)
        offset += len(data)
    blob = b"".join(blobs)
    manifest_lines.append(f"crc32 {zlib.crc32(blob) & 0xFFFFFFFF:08x}")
    header = ("\n".join(manifest_lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(SEPARATOR)
        fh.write(blob)


def load_weights(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Read a weight file, verifying the manifest and blob checksum."""
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.find(SEPARATOR)
    if sep < 0:
        raise WeightsError(f"{path}: missing manifest separator")
    header = raw[:sep].decode("utf-8", errors="replace").splitlines()
    blob = raw[sep + len(SEPARATOR):]
    if not header or header[0] != MAGIC.decode():
        raise WeightsError(f"{path}: bad magic line")

    entries: list[tuple[str, tuple[int, ...], int, int]] = []
    crc_expected = None
    for line in header[1:]:
        parts = line.split()
        if parts and parts[0] == "tensor":
            if len(parts) != 6 or parts[3] != "f32":
                raise WeightsError(f"{path}: malformed manifest line: {line!r}")
            shape = tuple(int(d) for d in parts[2].split("x"))
            entries.append((parts[1], shape, int(parts[4]), int(parts[5])))
        elif parts and parts[0] == "crc32":
            crc_expected = int(parts[1], 16)
        elif line.strip():
            raise WeightsError(f"{path}: unexpected manifest line: {line!r}")
    if crc_expected is None:
        raise WeightsError(f"{path}: manifest has no checksum")
    if zlib.crc32(blob) & 0xFFFFFFFF != crc_expected:
        raise WeightsError(f"{path}: blob checksum mismatch (truncated or corrupt file)")

    params: dict[str, np.ndarray] = {}
    for name, shape, offset, length in entries:
        expected = int(np.prod(shape)) * 4
        if length != expected:
            raise WeightsError(f"{path}: tensor {name}: byte length {length}, expected {expected}")
        if offset + length > len(blob):
            raise WeightsError(f"{path}: tensor {name}: extends past end of blob")
        flat = np.frombuffer(blob, dtype="<f4", count=expected // 4, offset=offset)
        params[name] = flat.reshape(shape).astype(np.float32)
    return params
