"""Deterministic software rendering: RGB canvases, ASCII frames, PNG bytes.

Everything here is nearest-neighbour and integer-exact so the same inputs
always produce the same pixels and the same PNG bytes.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .font5x7 import GLYPHS, HEIGHT as FONT_H, WIDTH as FONT_W

Color = tuple[int, int, int]

WHITE: Color = (255, 255, 255)
BLACK: Color = (0, 0, 0)

# fixed sizes used by the environments
CELL_PX = 32
IMAGE_PX = 448
VIEW_3D = (320, 240)
HEADER_PAD = 5


class Canvas:
    """RGB8 pixel buffer, row-major, shape (height, width, 3)."""

    __slots__ = ("pixels",)

    def __init__(self, width: int, height: int, color: Color = WHITE, pixels=None):
        if pixels is not None:
            arr = np.ascontiguousarray(pixels, dtype=np.uint8)
            if arr.ndim != 3 or arr.shape[2] != 3:
                raise ValueError("pixels must have shape (H, W, 3)")
            self.pixels = arr
        else:
            if width < 1 or height < 1:
                raise ValueError("canvas dimensions must be positive")
            self.pixels = np.empty((height, width, 3), dtype=np.uint8)
            self.pixels[:] = color

    @classmethod
    def from_array(cls, arr) -> "Canvas":
        return cls(0, 0, pixels=arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "Canvas":
        return Canvas.from_array(self.pixels.copy())

    def get(self, x: int, y: int) -> Color:
        return tuple(int(v) for v in self.pixels[y, x])

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, Canvas) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"Canvas({self.width}x{self.height})"

    # -- primitives --------------------------------------------------------

    def fill(self, color: Color) -> "Canvas":
        self.pixels[:] = color
        return self

    def rect(self, x0: int, y0: int, x1: int, y1: int, color: Color) -> "Canvas":
        """Filled rectangle covering pixels x0 <= x < x1, y0 <= y < y1."""
        x0, x1 = max(0, int(x0)), min(self.width, int(x1))
        y0, y1 = max(0, int(y0)), min(self.height, int(y1))
        if x0 < x1 and y0 < y1:
            self.pixels[y0:y1, x0:x1] = color
        return self

    def line(self, x0: int, y0: int, x1: int, y1: int, color: Color) -> "Canvas":
        """One-pixel Bresenham segment, clipped per pixel."""
        x0, y0, x1, y1 = int(x0), int(y0), int(x1), int(y1)
        dx, dy = abs(x1 - x0), -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        w, h = self.width, self.height
        while True:
            if 0 <= x0 < w and 0 <= y0 < h:
                self.pixels[y0, x0] = color
            if x0 == x1 and y0 == y1:
                break
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x0 += sx
            if e2 <= dx:
                err += dx
                y0 += sy
        return self

    def polygon(self, points: Sequence[tuple[float, float]], color: Color) -> "Canvas":
        """Filled convex polygon; a pixel is inside when its centre is."""
        mask, x0, y0 = polygon_mask(points, self.width, self.height)
        if mask is not None:
            h, w = mask.shape
            self.pixels[y0:y0 + h, x0:x0 + w][mask] = color
        return self

    def disc(self, cx: float, cy: float, r: float, color: Color) -> "Canvas":
        x0, x1 = max(0, int(math.floor(cx - r))), min(self.width, int(math.ceil(cx + r)) + 1)
        y0, y1 = max(0, int(math.floor(cy - r))), min(self.height, int(math.ceil(cy + r)) + 1)
        if x0 >= x1 or y0 >= y1:
            return self
        ys, xs = np.mgrid[y0:y1, x0:x1]
        m = (xs + 0.5 - cx) ** 2 + (ys + 0.5 - cy) ** 2 <= r * r
        self.pixels[y0:y1, x0:x1][m] = color
        return self

    def text(self, x: int, y: int, s: str, color: Color = BLACK, scale: int = 1) -> "Canvas":
        """Draw ``s`` with the embedded 5x7 font, top-left at (x, y)."""
        cx = int(x)
        for ch in s:
            glyph = GLYPHS.get(ch) or GLYPHS.get(ch.upper()) or GLYPHS["?"]
            for gy, row in enumerate(glyph):
                for gx, bit in enumerate(row):
                    if bit == "#":
                        px, py = cx + gx * scale, int(y) + gy * scale
                        self.rect(px, py, px + scale, py + scale, color)
            cx += (FONT_W + 1) * scale
        return self

    def blit(
        self,
        src: "Canvas",
        x: int,
        y: int,
        size: tuple[int, int] | None = None,
        angle: float = 0.0,
        background: Color | None = None,
    ) -> "Canvas":
        """Paste ``src`` with top-left at (x, y).

        ``size`` rescales (nearest neighbour) to (width, height); ``angle``
        rotates counter-clockwise about the centre.  Pixels that rotate in from
        outside the source take ``background`` (or are left untouched when
        None).
        """
        img = src.pixels
        if size is not None and (size[0], size[1]) != (src.width, src.height):
            img = resize_nearest(img, size[0], size[1])
        if angle % 360:
            img, valid = rotate_nearest(img, angle)
        else:
            valid = None
        h, w = img.shape[:2]
        x, y = int(x), int(y)
        dx0, dy0 = max(0, -x), max(0, -y)
        dx1, dy1 = min(w, self.width - x), min(h, self.height - y)
        if dx0 >= dx1 or dy0 >= dy1:
            return self
        region = self.pixels[y + dy0:y + dy1, x + dx0:x + dx1]
        patch = img[dy0:dy1, dx0:dx1]
        if valid is None:
            region[:] = patch
        else:
            v = valid[dy0:dy1, dx0:dx1]
            region[v] = patch[v]
            if background is not None:
                region[~v] = background
        return self


def polygon_mask(points, width: int, height: int):
    pts = [(float(px), float(py)) for px, py in points]
    if len(pts) < 3:
        return None, 0, 0
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = max(0, int(math.floor(min(xs)))), min(width, int(math.ceil(max(xs))) + 1)
    y0, y1 = max(0, int(math.floor(min(ys)))), min(height, int(math.ceil(max(ys))) + 1)
    if x0 >= x1 or y0 >= y1:
        return None, 0, 0
    gy, gx = np.mgrid[y0:y1, x0:x1]
    cx, cy = gx + 0.5, gy + 0.5
    # orientation-independent half-plane test
    area = sum(
        pts[i][0] * pts[(i + 1) % len(pts)][1] - pts[(i + 1) % len(pts)][0] * pts[i][1]
        for i in range(len(pts))
    )
    sign = 1.0 if area >= 0 else -1.0
    mask = np.ones(cx.shape, dtype=bool)
    eps = 1e-9
    for i in range(len(pts)):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % len(pts)]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        mask &= sign * cross >= -eps
    return mask, x0, y0


def resize_nearest(img: np.ndarray, width: int, height: int) -> np.ndarray:
    h, w = img.shape[:2]
    ys = (np.arange(height) * h) // height
    xs = (np.arange(width) * w) // width
    return img[ys[:, None], xs[None, :]]


def rotate_nearest(img: np.ndarray, angle: float) -> tuple[np.ndarray, np.ndarray | None]:
    """Rotate counter-clockwise by ``angle`` degrees, same output size.

    Multiples of 90 degrees are exact (no resampling).  Returns the rotated
    image and a mask of pixels that came from inside the source.
    """
    a = angle % 360
    if a % 90 == 0:
        k = int(a // 90)
        out = np.rot90(img, k=k)
        if out.shape == img.shape:
            return np.ascontiguousarray(out), None
    h, w = img.shape[:2]
    t = math.radians(a)
    c, s = math.cos(t), math.sin(t)
    cx, cy = w / 2.0, h / 2.0
    gy, gx = np.mgrid[0:h, 0:w]
    dx, dy = gx + 0.5 - cx, gy + 0.5 - cy
    # inverse map: screen y points down, so ccw on screen is cw in math coords
    sx = c * dx - s * dy + cx
    sy = s * dx + c * dy + cy
    ix = np.floor(sx).astype(np.int64)
    iy = np.floor(sy).astype(np.int64)
    valid = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.zeros_like(img)
    out[valid] = img[iy[valid], ix[valid]]
    return out, valid


def text_width(s: str, scale: int = 1) -> int:
    return len(s) * (FONT_W + 1) * scale - scale if s else 0


def header_height(scale: int = 1) -> int:
    return FONT_H * scale + HEADER_PAD


def compose_side_by_side(
    canvases: Sequence[Canvas],
    labels: Sequence[str] | None = None,
    gap_px: int = 8,
    background: Color = WHITE,
    scale: int = 1,
) -> Canvas:
    """Concatenate equal-height canvases left to right under a label band."""
    if not canvases:
        raise ValueError("nothing to compose")
    heights = {c.height for c in canvases}
    if len(heights) != 1:
        raise ValueError(f"canvas heights differ: {sorted(heights)}")
    labels = list(labels) if labels is not None else [""] * len(canvases)
    if len(labels) != len(canvases):
        raise ValueError("one label per canvas")
    hh = header_height(scale)
    width = sum(c.width for c in canvases) + gap_px * (len(canvases) - 1)
    out = Canvas(width, hh + canvases[0].height, background)
    x = 0
    for c, label in zip(canvases, labels):
        if label:
            tx = x + max(0, (c.width - text_width(label, scale)) // 2)
            out.text(tx, 2, label, BLACK, scale)
        out.pixels[hh:, x:x + c.width] = c.pixels
        x += c.width + gap_px
    return out


# -- PNG -------------------------------------------------------------------

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, data: bytes) -> bytes:
    crc = zlib.crc32(tag + data) & 0xFFFFFFFF
    return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", crc)


def encode_png(canvas: Canvas) -> bytes:
    """RGB8, non-interlaced, filter type 0 on every row, zlib level 6."""
    h, w = canvas.height, canvas.width
    raw = np.zeros((h, 1 + w * 3), dtype=np.uint8)
    raw[:, 1:] = canvas.pixels.reshape(h, w * 3)
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    idat = zlib.compress(raw.tobytes(), 6)
    return PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def decode_png(data: bytes) -> Canvas:
    """Decode any PNG to an RGB canvas (uses Pillow)."""
    import io

    from PIL import Image

    with Image.open(io.BytesIO(data)) as im:
        return Canvas.from_array(np.asarray(im.convert("RGB")))


# -- ASCII -----------------------------------------------------------------


@dataclass(frozen=True)
class CharGrid:
    rows: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    @classmethod
    def padded(cls, rows: Sequence[str]) -> "CharGrid":
        """Right-pad ragged lines with spaces so the grid is rectangular."""
        width = max((len(r) for r in rows), default=0)
        return cls(tuple(r.ljust(width) for r in rows))

    @property
    def width(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    @property
    def height(self) -> int:
        return len(self.rows)


def ascii_frame(grid: CharGrid) -> str:
    if not grid.rows or not grid.rows[0]:
        raise ValueError("empty character grid")
    width = len(grid.rows[0])
    for r in grid.rows:
        if len(r) != width:
            raise ValueError("ragged character grid")
        if any(not (32 <= ord(ch) < 127) for ch in r):
            raise ValueError("non-printable character in grid")
    return "\n".join(grid.rows)
