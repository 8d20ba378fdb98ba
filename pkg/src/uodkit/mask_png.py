"""Minimal indexed-color (palette) PNG writer for mask visualization.

Only what export needs: 8-bit single-channel index arrays, a fixed
high-contrast palette, no external imaging dependency.
"""

import struct
import zlib

import numpy as np

# index 0 is black (background); the rest cycle through saturated hues
_PALETTE_BASE = [
    (0, 0, 0),
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (250, 190, 190),
    (0, 128, 128),
    (170, 110, 40),
]


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def write_indexed_png(indices: np.ndarray, path) -> None:
    """Write a (H, W) uint8 index array as a palette PNG."""
    arr = np.asarray(indices, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D index array")
    h, w = arr.shape
    palette = bytearray()
    for i in range(256):
        r, g, b = _PALETTE_BASE[i % len(_PALETTE_BASE)] if i else (0, 0, 0)
        if i and i >= len(_PALETTE_BASE):
            # derive further colors deterministically from the base cycle
            r = (r + 37 * (i // len(_PALETTE_BASE))) % 256
            g = (g + 91 * (i // len(_PALETTE_BASE))) % 256
            b = (b + 53 * (i // len(_PALETTE_BASE))) % 256
        palette += bytes((r, g, b))
    raw = b"".join(b"\x00" + arr[row].tobytes() for row in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 3, 0, 0, 0)  # 8-bit, palette type
    blob = b"".join(
        [
            b"\x89PNG\r\n\x1a\n",
            _chunk(b"IHDR", ihdr),
            _chunk(b"PLTE", bytes(palette)),
            _chunk(b"IDAT", zlib.compress(raw, 9)),
            _chunk(b"IEND", b""),
        ]
    )
    with open(path, "wb") as fh:
        fh.write(blob)
