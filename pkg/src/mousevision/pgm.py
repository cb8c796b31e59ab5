"""Binary PGM ("P5") reading and writing, 8-bit grayscale only.

The parser is strict: anything other than a well-formed P5 file with a
maximum value of 255 and exactly width*height pixel bytes is rejected with a
:class:`~mousevision.exceptions.DataError` naming the offending byte offset.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ._io import write_bytes_atomic
from .exceptions import DataError

_WHITESPACE = b" \t\r\n\x0b\x0c"


class _Scanner:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.pos = 0
        self.source = source

    def error(self, message: str) -> DataError:
        return DataError(f"{self.source}: byte {self.pos}: {message}")

    def skip_space_and_comments(self) -> None:
        while self.pos < len(self.data):
            b = self.data[self.pos : self.pos + 1]
            if b in (b"#",):
                nl = self.data.find(b"\n", self.pos)
                self.pos = len(self.data) if nl < 0 else nl + 1
            elif b and b in _WHITESPACE:
                self.pos += 1
            else:
                return

    def read_token(self, what: str) -> bytes:
        self.skip_space_and_comments()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos : self.pos + 1] not in _WHITESPACE:
            self.pos += 1
        if self.pos == start:
            raise self.error(f"expected {what}, found end of file")
        return self.data[start : self.pos]

    def read_int(self, what: str) -> int:
        tok = self.read_token(what)
        try:
            return int(tok.decode("ascii"))
        except (UnicodeDecodeError, ValueError):
            raise self.error(f"expected integer {what}, found {tok!r}") from None


def read_pgm(path: str | Path) -> tuple[int, int, np.ndarray]:
    """Read a P5 PGM file; returns (width, height, pixels as (h, w) uint8)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"frame file not found: {path}")
    data = path.read_bytes()
    s = _Scanner(data, str(path))

    magic = s.read_token("magic number")
    if magic != b"P5":
        raise DataError(f"{path}: byte 0: not a binary PGM (magic {magic!r}, expected b'P5')")
    width = s.read_int("width")
    height = s.read_int("height")
    maxval = s.read_int("maximum value")
    if width < 1 or height < 1:
        raise DataError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise DataError(f"{path}: maximum value must be 255, got {maxval}")
    # exactly one whitespace byte separates the header from the raster
    if s.pos >= len(data) or data[s.pos : s.pos + 1] not in _WHITESPACE:
        raise s.error("expected single whitespace byte before pixel data")
    s.pos += 1
    expected = width * height
    remaining = len(data) - s.pos
    if remaining < expected:
        raise DataError(
            f"{path}: byte {s.pos}: truncated pixel data "
            f"(expected {expected} bytes, found {remaining})"
        )
    if remaining > expected:
        raise DataError(
            f"{path}: byte {s.pos + expected}: {remaining - expected} trailing bytes "
            f"after pixel data"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=expected, offset=s.pos)
    return width, height, pixels.reshape(height, width).copy()


def encode_pgm(pixels: np.ndarray) -> bytes:
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise DataError(f"PGM writer needs a 2-D uint8 array, got {pixels.dtype}{pixels.shape}")
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(pixels).tobytes()


def write_pgm(path: str | Path, pixels: np.ndarray) -> Path:
    return write_bytes_atomic(path, encode_pgm(pixels))
