"""Mask serialization: binary PGM (P5) files and run-length strings.

Run-length strings look like ``"136x136:412,5 548,7"``: raster shape, then
``start,length`` runs of foreground over the row-major flattened mask.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ManifestError

_RLE_HEAD = re.compile(r"^\s*(\d+)x(\d+):(.*)$", re.S)


def encode_rle(pixels):
    pixels = np.asarray(pixels, dtype=bool)
    flat = np.concatenate([[False], pixels.ravel(), [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(flat))
    starts, ends = edges[0::2], edges[1::2]
    runs = " ".join(f"{s},{e - s}" for s, e in zip(starts, ends))
    return f"{pixels.shape[0]}x{pixels.shape[1]}:{runs}"


def decode_rle(text):
    m = _RLE_HEAD.match(text)
    if not m:
        raise ManifestError(f"malformed run-length record: {text[:40]!r}")
    rows, cols = int(m.group(1)), int(m.group(2))
    flat = np.zeros(rows * cols, dtype=bool)
    for tok in m.group(3).split():
        try:
            start, length = (int(v) for v in tok.split(","))
        except ValueError:
            raise ManifestError(f"malformed run {tok!r}") from None
        if start < 0 or length < 1 or start + length > flat.size:
            raise ManifestError(f"run {tok!r} exceeds a {rows}x{cols} raster")
        flat[start:start + length] = True
    return flat.reshape(rows, cols)


def write_pgm(path, pixels):
    pixels = np.asarray(pixels, dtype=bool)
    rows, cols = pixels.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write((pixels.astype(np.uint8) * 255).tobytes())


def read_pgm(path):
    """Read a P5 mask; any nonzero sample is foreground."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ManifestError(f"{path}: truncated PGM header")
        fields.append(data[start:pos])
    pos += 1
    if fields[0] != b"P5":
        raise ManifestError(f"{path}: not a binary PGM (P5) file")
    cols, rows, maxval = (int(f) for f in fields[1:])
    if maxval > 255:
        raise ManifestError(f"{path}: 16-bit PGM masks are not supported")
    if len(data) - pos < rows * cols:
        raise ManifestError(f"{path}: PGM data shorter than {rows}x{cols}")
    body = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=pos)
    return body.reshape(rows, cols) != 0
