"""
Checkpoint Module
Binary parameter files: header (magic "DPW2", u32 version, u32 count) followed by
per-parameter records (u16 name length, name bytes, u8 rank, u32 dims, f32 data),
all little-endian.
"""
import os
import struct
from typing import Dict

import numpy as np

from .errors import CheckpointFormatError

MAGIC = b"DPW2"
VERSION = 1
_HEADER = struct.Struct("<4sII")


def save_parameters(path: str, params: Dict[str, np.ndarray]) -> None:
    """Write named arrays in sorted name order."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, len(params)))
        for name in sorted(params):
            arr = np.asarray(params[name])
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_parameters(path: str) -> Dict[str, np.ndarray]:
    """
    Read a parameter file.

    Returns:
        Mapping of name to float32 array

    Raises:
        CheckpointFormatError: bad magic, unsupported version or truncated data
    """
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise CheckpointFormatError(f"cannot read checkpoint {path}: {e}") from e

    if len(blob) < _HEADER.size:
        raise CheckpointFormatError(f"{path}: truncated header")
    magic, version, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")

    offset = _HEADER.size
    params: Dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", blob, offset)
            offset += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            if offset + 4 * size > len(blob):
                raise CheckpointFormatError(f"{path}: truncated data for '{name}'")
            params[name] = np.frombuffer(blob, dtype="<f4", count=size, offset=offset).reshape(dims).copy()
            offset += 4 * size
    except (struct.error, UnicodeDecodeError) as e:
        raise CheckpointFormatError(f"{path}: malformed record: {e}") from e
    return params
