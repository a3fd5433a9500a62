"""Self-contained PNG codec for the worker: 8-bit gray/RGB, no interlacing.

The worker talks to clients only through PNG-over-base64, so it carries its
own codec rather than depending on any engine package.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

SIGNATURE = b"\x89PNG\r\n\x1a\n"


class PngError(ValueError):
    pass


def encode(arr: np.ndarray) -> bytes:
    """(h, w) or (h, w, c) uint8 array to PNG bytes; deterministic output."""
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    height, width, channels = arr.shape
    if channels not in (1, 3):
        raise PngError(f"channels must be 1 or 3, got {channels}")
    color_type = 0 if channels == 1 else 2
    raw = b"".join(b"\x00" + arr[y].tobytes() for y in range(height))
    ihdr = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    return (
        SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(raw, 9))
        + _chunk(b"IEND", b"")
    )


def _chunk(ctype: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + ctype
        + body
        + struct.pack(">I", zlib.crc32(ctype + body))
    )


def decode(blob: bytes) -> np.ndarray:
    """PNG bytes to an (h, w, c) uint8 array."""
    if not blob.startswith(SIGNATURE):
        raise PngError("bad PNG signature")
    pos = len(SIGNATURE)
    header = None
    idat = bytearray()
    while pos + 12 <= len(blob):
        length, ctype = struct.unpack(">I4s", blob[pos : pos + 8])
        body = blob[pos + 8 : pos + 8 + length]
        if len(body) != length:
            raise PngError("truncated chunk")
        pos += 12 + length
        if ctype == b"IHDR":
            header = struct.unpack(">IIBBBBB", body)
        elif ctype == b"IDAT":
            idat.extend(body)
        elif ctype == b"IEND":
            break
    if header is None:
        raise PngError("missing IHDR")
    width, height, depth, color_type, _, _, interlace = header
    if depth != 8 or color_type not in (0, 2) or interlace != 0:
        raise PngError("only 8-bit gray/RGB non-interlaced PNG is supported")
    channels = 1 if color_type == 0 else 3
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise PngError(f"corrupt pixel data: {exc}") from exc
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise PngError("pixel data has the wrong length")
    out = bytearray()
    prev = bytearray(stride)
    pos = 0
    for _ in range(height):
        ftype = raw[pos]
        pos += 1
        line = bytearray(raw[pos : pos + stride])
        pos += stride
        if ftype == 0:
            pass
        elif ftype == 1:
            for i in range(channels, stride):
                line[i] = (line[i] + line[i - channels]) & 0xFF
        elif ftype == 2:
            for i in range(stride):
                line[i] = (line[i] + prev[i]) & 0xFF
        elif ftype == 3:
            for i in range(stride):
                left = line[i - channels] if i >= channels else 0
                line[i] = (line[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:
            for i in range(stride):
                left = line[i - channels] if i >= channels else 0
                up = prev[i]
                upleft = prev[i - channels] if i >= channels else 0
                line[i] = (line[i] + _paeth(left, up, upleft)) & 0xFF
        else:
            raise PngError(f"unknown filter type {ftype}")
        out.extend(line)
        prev = line
    return np.frombuffer(bytes(out), dtype=np.uint8).reshape(height, width, channels)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c
