"""Minimal PGM image reader/writer (binary P5 and plain P2).

Reading scales linearly to greyscale values in [0, 1]; writing quantises to
8-bit binary P5.  Comments (``#`` lines) in the header are skipped.
"""

from __future__ import annotations

import numpy as np

from .linop import ImageGrid


def _tokens(data: bytes):
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def read_pgm(path) -> ImageGrid:
    """Read a P5 (binary, maxval <= 255) or P2 (plain) PGM file."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
    except StopIteration:
        raise ValueError(f"{path}: empty file") from None
    if magic not in (b"P5", b"P2"):
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    try:
        (w_tok, _), (h_tok, _), (max_tok, end) = next(toks), next(toks), next(toks)
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except (StopIteration, ValueError):
        raise ValueError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1 or maxval < 1:
        raise ValueError(f"{path}: bad PGM dimensions or maxval")
    n = width * height
    if magic == b"P5":
        if maxval > 255:
            raise ValueError(f"{path}: only single-byte P5 rasters supported")
        raster = data[end + 1 : end + 1 + n]
        if len(raster) != n:
            raise ValueError(f"{path}: truncated raster, expected {n} bytes")
        values = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    else:
        rest = [int(t) for t, _ in _tokens(data[end:])]
        if len(rest) != n:
            raise ValueError(f"{path}: expected {n} samples, got {len(rest)}")
        values = np.asarray(rest, dtype=np.float64)
    return ImageGrid(width=width, height=height, values=values / maxval)


def write_pgm(path, grid: ImageGrid):
    """Write 8-bit binary P5, clipping values to [0, 1]."""
    img = np.clip(grid.values, 0.0, 1.0)
    raster = np.round(img * 255.0).astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        fh.write(raster)
