from __future__ import annotations

import io
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from callgym.render import (
    PNG_SIGNATURE, Canvas, CharGrid, ascii_frame, compose_side_by_side, decode_png, encode_png, header_height,
    resize_nearest, rotate_nearest, text_width,
)


def test_rect_is_half_open_and_clipped():
    cv = Canvas(6, 4, (0, 0, 0)).rect(1, 1, 3, 2, (255, 0, 0)).rect(-5, -5, 1, 1, (0, 255, 0))
    red = np.argwhere((cv.pixels == (255, 0, 0)).all(axis=2)).tolist()
    assert red == [[1, 1], [1, 2]]
    assert cv.get(0, 0) == (0, 255, 0)


def test_line_endpoints_and_diagonal():
    cv = Canvas(5, 5, (0, 0, 0)).line(0, 0, 4, 4, (9, 9, 9))
    assert [cv.get(k, k) for k in range(5)] == [(9, 9, 9)] * 5
    assert int((cv.pixels[:, :, 0] == 9).sum()) == 5


def test_disc_area_close_to_pi_r_squared():
    cv = Canvas(100, 100, (0, 0, 0)).disc(50, 50, 20, (1, 1, 1))
    area = int((cv.pixels[:, :, 0] == 1).sum())
    assert abs(area - np.pi * 400) / (np.pi * 400) < 0.02


def test_polygon_orientation_independent():
    square = [(2, 2), (8, 2), (8, 8), (2, 8)]
    a = Canvas(10, 10, (0, 0, 0)).polygon(square, (5, 5, 5))
    b = Canvas(10, 10, (0, 0, 0)).polygon(square[::-1], (5, 5, 5))
    assert a == b
    assert int((a.pixels[:, :, 0] == 5).sum()) == 36


def test_text_uses_font_width():
    cv = Canvas(40, 10, (255, 255, 255)).text(0, 0, "AB", (0, 0, 0))
    cols = np.nonzero((cv.pixels[:, :, 0] == 0).any(axis=0))[0]
    assert cols.max() < text_width("AB")


def test_rotate_quarter_turn_exact_and_inverse():
    img = np.arange(4 * 4 * 3, dtype=np.uint8).reshape(4, 4, 3)
    out, valid = rotate_nearest(img, 90)
    assert valid is None
    assert np.array_equal(out, np.rot90(img))
    back, _ = rotate_nearest(out, -90)
    assert np.array_equal(back, img)


def test_rotate_arbitrary_reports_valid_mask():
    img = np.full((20, 20, 3), 200, dtype=np.uint8)
    out, valid = rotate_nearest(img, 45)
    assert valid is not None and not valid.all()
    assert (out[valid] == 200).all()


def test_resize_nearest_blocks():
    img = np.array([[[1, 1, 1], [2, 2, 2]]], dtype=np.uint8)
    out = resize_nearest(img, 4, 2)
    assert out[:, :, 0].tolist() == [[1, 1, 2, 2], [1, 1, 2, 2]]


def test_compose_side_by_side_geometry():
    a, b = Canvas(10, 6, (1, 1, 1)), Canvas(7, 6, (2, 2, 2))
    out = compose_side_by_side([a, b], ["A", "B"], gap_px=3)
    assert (out.width, out.height) == (20, 6 + header_height())
    with pytest.raises(ValueError):
        compose_side_by_side([a, Canvas(7, 5)])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 24), st.integers(1, 24), st.integers(0, 2**32 - 1))
def test_png_round_trips_through_pillow(w, h, seed):
    px = np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    data = encode_png(Canvas.from_array(px))
    with Image.open(io.BytesIO(data)) as im:
        assert im.mode == "RGB"
        assert im.size == (w, h)
        assert im.info.get("interlace", 0) == 0
        assert np.array_equal(np.asarray(im), px)
    assert decode_png(data) == Canvas.from_array(px)


def test_png_layout_is_fixed():
    cv = Canvas(3, 2, (10, 20, 30))
    data = encode_png(cv)
    assert data.startswith(PNG_SIGNATURE)
    assert data[12:16] == b"IHDR"
    # every scanline uses filter type 0
    idat_len = int.from_bytes(data[33:37], "big")
    raw = zlib.decompress(data[41:41 + idat_len])
    assert [raw[k * 10] for k in range(2)] == [0, 0]
    assert encode_png(cv.copy()) == data


def test_ascii_frame_checks_grid():
    assert ascii_frame(CharGrid(["ab", "cd"])) == "ab\ncd"
    assert CharGrid.padded(["a", "abc"]).rows == ("a  ", "abc")
    with pytest.raises(ValueError):
        ascii_frame(CharGrid(["ab", "c"]))
    with pytest.raises(ValueError):
        ascii_frame(CharGrid(["é"]))
