"""
Grid dump files: a 16-byte header (magic "DPG2", u8 mode, 3 reserved bytes,
u16 C, u16 H, u16 W, u16 reserved) followed by C·H·W little-endian float32 values
in channel-major order.
"""
import os
import struct

import numpy as np

from core.errors import GridFormatError
from .projection import ProjectedGrid

MAGIC = b"DPG2"
_HEADER = struct.Struct("<4sB3xHHHH")
_MODES = {"front": 0, "bev": 1}
_MODE_NAMES = {v: k for k, v in _MODES.items()}


def write_grid(path: str, grid: ProjectedGrid) -> None:
    channels = grid.to_channels(np.float32)
    c, h, w = channels.shape
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, _MODES[grid.mode], c, h, w, 0))
        f.write(channels.astype("<f4").tobytes())


def read_grid(path: str) -> ProjectedGrid:
    """Read a grid dump back into compact form."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise GridFormatError(f"{path}: truncated header")
    magic, mode, c, h, w, _ = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}")
    if mode not in _MODE_NAMES:
        raise GridFormatError(f"{path}: unknown mode byte {mode}")
    expected = _HEADER.size + 4 * c * h * w
    if len(blob) != expected:
        raise GridFormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    channels = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(c, h, w)
    return ProjectedGrid.from_channels(_MODE_NAMES[mode], channels)


def read_header(path: str) -> dict:
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise GridFormatError(f"{path}: truncated header")
    magic, mode, c, h, w, _ = _HEADER.unpack(head)
    if magic != MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}")
    return {"mode": _MODE_NAMES.get(mode, mode), "channels": c, "height": h, "width": w}
