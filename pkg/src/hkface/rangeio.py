"""Range images: storage, the two on-disk formats, and cropping.

A range image is the sampled graph surface ``z = f(x, y)``: ``depth[row, col]``
holds z at column x and row y. Larger depth means closer to the camera.
Holes and background are carried by a boolean ``valid`` mask and never by
magic depth values.

File formats
------------
AsciiGrid
    ``RIG <width> <height>`` on the first line, then ``height`` lines of
    ``width`` whitespace-separated decimals. The token ``NaN`` marks an
    invalid pixel.
Pgm16
    Binary ``P5`` PGM, maxval 65535, big-endian samples. Sample 0 is an
    invalid pixel. An optional header comment ``# scale <s>`` maps sample
    ``v`` to depth ``v * s`` (default scale 1).
"""
from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BadParams, DimensionMismatch, ParseError, RectOutOfBounds

__all__ = [
    "RangeFormat",
    "RangeImage",
    "CropRect",
    "load_range_image",
    "save_range_image",
    "crop",
    "central_crop_rect",
]


class RangeFormat(str, Enum):
    ASCII_GRID = "ascii"
    PGM16 = "pgm16"

    @classmethod
    def from_path(cls, path) -> "RangeFormat":
        ext = os.path.splitext(str(path))[1].lower()
        if ext in (".pgm", ".pnm"):
            return cls.PGM16
        return cls.ASCII_GRID


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RangeImage:
    """Immutable depth grid with a validity mask."""

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        depth = np.array(self.depth, dtype=np.float64, copy=True)
        valid = np.array(self.valid, dtype=bool, copy=True)
        if depth.ndim != 2 or depth.shape[0] < 1 or depth.shape[1] < 1:
            raise BadParams(f"depth must be a non-empty 2-D grid, got shape {depth.shape}")
        if valid.shape != depth.shape:
            raise DimensionMismatch(f"mask shape {valid.shape} != depth shape {depth.shape}")
        valid &= np.isfinite(depth)
        # invalid samples are zeroed so they can never leak into arithmetic
        depth[~valid] = 0.0
        object.__setattr__(self, "depth", _frozen(depth))
        object.__setattr__(self, "valid", _frozen(valid))

    @classmethod
    def from_array(cls, depth, valid=None) -> "RangeImage":
        """Build from a depth array; NaN entries become invalid when no mask is given."""
        depth = np.asarray(depth, dtype=np.float64)
        if valid is None:
            valid = np.isfinite(depth)
        return cls(depth, valid)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    def masked(self) -> np.ndarray:
        """Depth as a float array with NaN at invalid pixels."""
        out = self.depth.copy()
        out[~self.valid] = np.nan
        return out

    def with_valid(self, valid: np.ndarray) -> "RangeImage":
        return RangeImage(self.depth, np.asarray(valid, dtype=bool) & self.valid)

    def __eq__(self, other):
        if not isinstance(other, RangeImage):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.depth, other.depth)
        )

    __hash__ = None


@dataclass(frozen=True)
class CropRect:
    row0: int
    col0: int
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise BadParams(f"crop extent must be positive, got {self.rows}x{self.cols}")
        if self.row0 < 0 or self.col0 < 0:
            raise BadParams(f"crop origin must be non-negative, got ({self.row0}, {self.col0})")

    @classmethod
    def parse(cls, text: str) -> "CropRect":
        """Parse ``r0,c0,rows,cols``."""
        try:
            parts = [int(p) for p in text.split(",")]
        except ValueError:
            raise BadParams(f"crop must be four integers r0,c0,rows,cols: {text!r}") from None
        if len(parts) != 4:
            raise BadParams(f"crop must be four integers r0,c0,rows,cols: {text!r}")
        return cls(*parts)

    def __str__(self):
        return f"{self.row0},{self.col0},{self.rows},{self.cols}"

    def fits(self, height: int, width: int) -> bool:
        return self.row0 + self.rows <= height and self.col0 + self.cols <= width

    def compose(self, inner: "CropRect") -> "CropRect":
        """The rectangle equivalent to cropping by ``self`` and then by ``inner``."""
        if not inner.fits(self.rows, self.cols):
            raise RectOutOfBounds(f"{inner} does not fit inside a {self.rows}x{self.cols} crop")
        return CropRect(self.row0 + inner.row0, self.col0 + inner.col0, inner.rows, inner.cols)


def central_crop_rect(height: int, width: int, rows: int = 70, cols: int = 70) -> CropRect:
    """Centred ``rows x cols`` window, shrunk to the image when it is smaller."""
    rows, cols = min(rows, height), min(cols, width)
    return CropRect((height - rows) // 2, (width - cols) // 2, rows, cols)


def crop(img: RangeImage, rect: CropRect) -> RangeImage:
    if not rect.fits(img.height, img.width):
        raise RectOutOfBounds(f"crop {rect} exceeds image {img.height}x{img.width}")
    sl = (slice(rect.row0, rect.row0 + rect.rows), slice(rect.col0, rect.col0 + rect.cols))
    return RangeImage(img.depth[sl], img.valid[sl])


# -- AsciiGrid ---------------------------------------------------------------

def _load_ascii(path) -> RangeImage:
    with open(path, "r", encoding="ascii", errors="strict") as fh:
        try:
            lines = fh.read().splitlines()
        except UnicodeDecodeError as exc:
            raise ParseError("non-ASCII content", offset=exc.start) from None
    if not lines:
        raise ParseError("empty file", line=1)
    head = lines[0].split()
    if len(head) != 3 or head[0] != "RIG":
        raise ParseError("expected header 'RIG <width> <height>'", line=1)
    try:
        width, height = int(head[1]), int(head[2])
    except ValueError:
        raise ParseError("non-integer dimensions in header", line=1) from None
    if width < 1 or height < 1:
        raise ParseError("dimensions must be positive", line=1)

    rows = [ln for ln in lines[1:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise DimensionMismatch(f"header declares {height} rows, found {len(rows)}")

    depth = np.empty((height, width), dtype=np.float64)
    for r, ln in enumerate(rows):
        toks = ln.split()
        if len(toks) != width:
            raise DimensionMismatch(
                f"row {r} has {len(toks)} values, header declares {width} (line {r + 2})"
            )
        for c, tok in enumerate(toks):
            if tok == "NaN":
                depth[r, c] = np.nan
                continue
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(f"bad number {tok!r}", line=r + 2) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {tok!r}", line=r + 2)
            depth[r, c] = v
    return RangeImage.from_array(depth)


def _save_ascii(img: RangeImage, path) -> None:
    out = [f"RIG {img.width} {img.height}"]
    for r in range(img.height):
        out.append(
            " ".join(
                repr(float(v)) if ok else "NaN"
                for v, ok in zip(img.depth[r], img.valid[r])
            )
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


# -- Pgm16 -------------------------------------------------------------------

_SCALE_RE = re.compile(rb"#\s*scale\s+(\S+)")


def _load_pgm16(path) -> RangeImage:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise ParseError("not a binary PGM (missing 'P5' magic)", offset=0)

    pos = 2
    tokens = []
    scale = 1.0
    n = len(data)
    while len(tokens) < 3:
        if pos >= n:
            raise ParseError("truncated header", offset=pos)
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            end = n if end < 0 else end
            m = _SCALE_RE.match(data[pos:end])
            if m:
                try:
                    scale = float(m.group(1))
                except ValueError:
                    raise ParseError("bad scale comment", offset=pos) from None
                if not (math.isfinite(scale) and scale > 0):
                    raise ParseError("scale must be positive and finite", offset=pos)
            pos = end + 1
        else:
            start = pos
            while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            try:
                tokens.append(int(data[start:pos]))
            except ValueError:
                raise ParseError(f"bad header token {data[start:pos]!r}", offset=start) from None
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ParseError("missing whitespace after maxval", offset=pos)
    pos += 1

    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise ParseError("dimensions must be positive", offset=2)
    if maxval != 65535:
        raise ParseError(f"expected maxval 65535, got {maxval}", offset=pos)
    payload = data[pos:]
    need = 2 * width * height
    if len(payload) != need:
        raise DimensionMismatch(f"header declares {need} payload bytes, found {len(payload)}")
    samples = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    valid = samples != 0
    depth = samples.astype(np.float64) * scale
    return RangeImage(depth, valid)


def pgm_scale_for(img: RangeImage) -> float:
    """Power-of-two scale that fits the image's largest depth into 16 bits."""
    top = float(img.depth[img.valid].max()) if img.n_valid else 1.0
    if top <= 0:
        return 1.0
    return 2.0 ** math.ceil(math.log2(top / 65535.0))


def _save_pgm16(img: RangeImage, path, scale: float | None) -> None:
    if scale is None:
        scale = pgm_scale_for(img)
    if not (scale > 0 and math.isfinite(scale)):
        raise BadParams(f"scale must be positive, got {scale}")
    v = np.rint(img.depth / scale)
    if img.n_valid and (v[img.valid].min() < 1 or v[img.valid].max() > 65535):
        raise BadParams("depths do not fit samples 1..65535 at this scale")
    samples = np.where(img.valid, v, 0).astype(">u2")
    header = f"P5\n# scale {scale!r}\n{img.width} {img.height}\n65535\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(samples.tobytes())


def load_range_image(path, format: RangeFormat | str | None = None) -> RangeImage:
    """Read a range image; the format is guessed from the extension when omitted.

    Raises ``FileNotFoundError``, :class:`ParseError` or :class:`DimensionMismatch`.
    """
    fmt = RangeFormat(format) if format is not None else RangeFormat.from_path(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such range image: {path}")
    if fmt is RangeFormat.PGM16:
        return _load_pgm16(path)
    return _load_ascii(path)


def save_range_image(img: RangeImage, path, format: RangeFormat | str | None = None,
                     scale: float | None = None) -> None:
    fmt = RangeFormat(format) if format is not None else RangeFormat.from_path(path)
    if fmt is RangeFormat.PGM16:
        _save_pgm16(img, path, scale)
    else:
        _save_ascii(img, path)
