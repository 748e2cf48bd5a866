"""Grayscale patches and their binary PGM (P5) container."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import FormatError

_WHITESPACE = b" \t\n\r\x0b\x0c"


@dataclass(frozen=True, eq=False)
class Patch:
    """Normalized grayscale image; ``pixels`` has shape ``(height, width)``."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if self.width < 1 or self.height < 1:
            raise ValueError("patch dimensions must be positive")
        if px.size != self.width * self.height:
            raise ValueError(
                f"pixel count {px.size} != width*height {self.width * self.height}"
            )
        px = px.reshape(self.height, self.width)
        if not np.all((px >= 0.0) & (px <= 1.0)):
            raise ValueError("pixel values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr) -> "Patch":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d image array")
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)

    @property
    def flat(self) -> np.ndarray:
        return self.pixels.ravel()

    def quantized(self) -> np.ndarray:
        """8-bit levels using round-half-up to the nearest 1/255 step."""
        return np.floor(self.pixels * 255.0 + 0.5).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, Patch):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )


def encode_pgm(patch: Patch) -> bytes:
    header = b"P5\n%d %d\n255\n" % (patch.width, patch.height)
    return header + patch.quantized().tobytes()


def decode_pgm(data: bytes) -> Patch:
    """Parse a binary PGM with maxval 255. Comments are not accepted."""
    if data[:2] != b"P5":
        raise FormatError(f"magic: expected b'P5', got {data[:2]!r}")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise FormatError(f"{name}: missing whitespace separator before field")
        pos += 1
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        token = data[start:pos]
        if not token:
            found = data[pos : pos + 1]
            raise FormatError(f"{name}: expected decimal integer, found {found!r}")
        fields.append((name, int(token)))
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("maxval: missing single whitespace before payload")
    pos += 1
    (_, width), (_, height), (_, maxval) = fields
    if width < 1:
        raise FormatError(f"width: must be positive, got {width}")
    if height < 1:
        raise FormatError(f"height: must be positive, got {height}")
    if maxval != 255:
        raise FormatError(f"maxval: only 255 is supported, got {maxval}")
    payload = data[pos:]
    if len(payload) < width * height:
        raise FormatError(
            f"payload: truncated, expected {width * height} bytes, got {len(payload)}"
        )
    if len(payload) > width * height:
        raise FormatError(
            f"payload: {len(payload) - width * height} trailing bytes after image data"
        )
    levels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return Patch(width=width, height=height, pixels=levels / 255.0)


def read_patch(path) -> Patch:
    return decode_pgm(Path(path).read_bytes())


def write_patch(patch: Patch, path) -> None:
    Path(path).write_bytes(encode_pgm(patch))
