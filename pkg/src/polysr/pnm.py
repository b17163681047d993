"""Netpbm image I/O (PGM ``P2``/``P5``, PPM ``P3``/``P6``).

Images are read into single-channel float rasters in ``[0, 1]``; colour
inputs are reduced to luma.  PNG is accepted on read when Pillow is
installed.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import MalformedImage, MissingFile
from .imaging import ImageGrid

__all__ = ["LUMA_WEIGHTS", "read_image", "write_pgm"]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _tokens(buf: bytes, count: int, pos: int):
    # Read `count` whitespace-separated header tokens, skipping # comments.
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedImage("truncated header")
        out.append(buf[start:pos])
    return out, pos


def _decode_pnm(buf: bytes, name: str) -> np.ndarray:
    magic = buf[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise MalformedImage(f"{name}: unsupported magic number {magic!r}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    try:
        (w, h, maxval), pos = _tokens(buf, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise MalformedImage(f"{name}: bad header") from exc
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise MalformedImage(f"{name}: bad dimensions or maxval")
    count = w * h * channels
    if magic in (b"P5", b"P6"):
        # exactly one whitespace byte separates header and raster
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = buf[pos : pos + count * dtype.itemsize]
        if len(raw) != count * dtype.itemsize:
            raise MalformedImage(f"{name}: raster is truncated")
        values = np.frombuffer(raw, dtype=dtype).astype(float)
    else:
        try:
            values = np.array(buf[pos:].split()[:count], dtype=float)
        except ValueError as exc:
            raise MalformedImage(f"{name}: non-numeric sample") from exc
        if values.size != count:
            raise MalformedImage(f"{name}: expected {count} samples, found {values.size}")
    if values.max(initial=0) > maxval:
        raise MalformedImage(f"{name}: sample exceeds maxval {maxval}")
    values = values.reshape(h, w, channels) / maxval
    if channels == 3:
        return values @ np.array(LUMA_WEIGHTS)
    return values[..., 0]


def read_image(path) -> ImageGrid:
    """Load a greyscale image scaled to ``[0, 1]``."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(f"no such image: {path}")
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] == b"\x89PNG\r\n\x1a\n":
        try:
            from PIL import Image
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise MalformedImage(f"{path}: reading PNG requires Pillow") from exc
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I"):
                a = np.asarray(im, dtype=float) / 65535.0
            else:
                a = np.asarray(im.convert("L"), dtype=float) / 255.0
        return ImageGrid.from_array(a)
    return ImageGrid.from_array(_decode_pnm(buf, path))


def write_pgm(path, img: ImageGrid, bits: int = 16, binary: bool = True) -> None:
    """Write ``img`` as PGM, clamping to ``[0, 1]`` before quantising."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = (1 << bits) - 1
    q = np.rint(np.clip(img.to_array(), 0.0, 1.0) * maxval).astype(np.int64)
    header = f"{'P5' if binary else 'P2'}\n{img.cols} {img.rows}\n{maxval}\n".encode()
    if binary:
        body = q.astype(">u2" if bits == 16 else "u1").tobytes()
    else:
        body = "\n".join(" ".join(map(str, row)) for row in q.tolist()).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(header + body)
