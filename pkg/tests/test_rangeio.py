import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from hkface.errors import BadParams, DimensionMismatch, ParseError, RectOutOfBounds
from hkface.rangeio import (
    CropRect,
    RangeImage,
    central_crop_rect,
    crop,
    load_range_image,
    save_range_image,
)


def ramp(h=10, w=10):
    r, c = np.mgrid[0:h, 0:w]
    return RangeImage(100.0 * r + c, np.ones((h, w), bool))


def test_ascii_constant_grid(tmp_path):
    p = tmp_path / "c.rig"
    p.write_text("RIG 3 3\n5.0 5.0 5.0\n5.0 5.0 5.0\n5.0 5.0 5.0\n")
    img = load_range_image(p)
    assert img.shape == (3, 3)
    assert np.all(img.depth == 5.0) and img.valid.all()


def test_ascii_nan_marks_invalid(tmp_path):
    p = tmp_path / "n.rig"
    p.write_text("RIG 2 2\n1 NaN\n3 4\n")
    img = load_range_image(p)
    assert img.valid.tolist() == [[True, False], [True, True]]


@pytest.mark.parametrize(
    "text, exc",
    [
        ("", ParseError),
        ("RIG 2\n1 2\n", ParseError),
        ("RIG 2 2\n1 2\n", DimensionMismatch),
        ("RIG 2 2\n1 2\n3\n", DimensionMismatch),
        ("RIG 2 1\n1 x\n", ParseError),
        ("RIG 2 1\n1 inf\n", ParseError),
    ],
)
def test_ascii_errors(tmp_path, text, exc):
    p = tmp_path / "bad.rig"
    p.write_text(text)
    with pytest.raises(exc):
        load_range_image(p)


def test_ascii_error_reports_line(tmp_path):
    p = tmp_path / "bad.rig"
    p.write_text("RIG 2 2\n1 2\n3 oops\n")
    with pytest.raises(ParseError) as info:
        load_range_image(p)
    assert info.value.line == 3


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_range_image("/nonexistent/x.pgm")


def test_pgm16_zero_sample_is_invalid_with_reference_writer(tmp_path):
    # an independent writer (Pillow) produces the file
    arr = np.array([[0, 1000, 2000], [65535, 7, 0]], dtype=np.uint16)
    p = tmp_path / "ref.pgm"
    Image.fromarray(arr).save(p)
    assert p.read_bytes().startswith(b"P5\n3 2\n65535\n")
    img = load_range_image(p)
    assert img.valid.tolist() == [[False, True, True], [True, True, False]]
    assert img.depth[img.valid].tolist() == [1000, 2000, 65535, 7]


def test_pgm16_written_file_reads_in_reference_reader(tmp_path, rng):
    z = rng.integers(1, 65536, size=(7, 9)).astype(float)
    valid = rng.random((7, 9)) > 0.2
    img = RangeImage(z, valid)
    p = tmp_path / "out.pgm"
    save_range_image(img, p, scale=1.0)
    ref = np.array(Image.open(p)).astype(np.int64)
    assert np.array_equal(ref, np.where(valid, z, 0).astype(np.int64))


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_pgm16_round_trip_exact_on_scale_grid(h, w, seed):
    rng = np.random.default_rng(seed)
    scale = 0.25
    z = rng.integers(1, 65536, size=(h, w)) * scale
    img = RangeImage(z, rng.random((h, w)) > 0.3)
    import tempfile, os
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "x.pgm")
        save_range_image(img, p, scale=scale)
        assert load_range_image(p) == img


def test_ascii_round_trip_exact(tmp_path, rng):
    z = rng.normal(300, 50, size=(6, 5))
    valid = rng.random((6, 5)) > 0.25
    img = RangeImage(z, valid)
    p = tmp_path / "x.rig"
    save_range_image(img, p)
    assert load_range_image(p) == img


def test_pgm16_bad_maxval_and_truncation(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 1\n255\n\x01\x02")
    with pytest.raises(ParseError):
        load_range_image(p)
    p.write_bytes(b"P5\n2 2\n65535\n\x00\x01\x00\x02")
    with pytest.raises(DimensionMismatch):
        load_range_image(p)
    p.write_bytes(b"P2\n1 1\n65535\n1\n")
    with pytest.raises(ParseError):
        load_range_image(p)


def test_pgm16_scale_comment(tmp_path):
    p = tmp_path / "s.pgm"
    p.write_bytes(b"P5\n# scale 0.5\n2 1\n65535\n\x00\x04\x00\x00")
    img = load_range_image(p)
    assert img.depth[0, 0] == 2.0 and not img.valid[0, 1]


def test_pgm16_save_out_of_range():
    with pytest.raises(BadParams):
        import tempfile, os
        with tempfile.TemporaryDirectory() as d:
            save_range_image(RangeImage([[1e6]], [[True]]), os.path.join(d, "x.pgm"), scale=1.0)


def test_range_image_invariants():
    img = RangeImage([[1.0, np.nan], [np.inf, 4.0]], np.ones((2, 2), bool))
    assert img.valid.tolist() == [[True, False], [False, True]]
    assert img.depth[0, 1] == 0.0
    with pytest.raises(ValueError):
        img.depth[0, 0] = 3.0
    with pytest.raises(DimensionMismatch):
        RangeImage(np.zeros((2, 2)), np.ones((3, 2), bool))


def test_crop_identity():
    img = ramp()
    assert crop(img, CropRect(0, 0, 10, 10)) == img


def test_crop_index_arithmetic():
    out = crop(ramp(), CropRect(2, 3, 4, 5))
    assert out.shape == (4, 5)
    assert out.depth[0, 0] == ramp().depth[2, 3]


def test_crop_out_of_bounds():
    with pytest.raises(RectOutOfBounds):
        crop(ramp(), CropRect(0, 7, 3, 4))


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2), st.integers(0, 2))
def test_crop_composition(r0, c0, r1, c1):
    img = ramp(12, 12)
    outer = CropRect(r0, c0, 8, 8)
    inner = CropRect(r1, c1, 5, 4)
    assert crop(crop(img, outer), inner) == crop(img, outer.compose(inner))


def test_crop_parse_and_central():
    assert CropRect.parse("1,2,3,4") == CropRect(1, 2, 3, 4)
    for bad in ("1,2,3", "a,b,c,d", "0,0,0,4"):
        with pytest.raises(BadParams):
            CropRect.parse(bad)
    assert central_crop_rect(100, 100) == CropRect(15, 15, 70, 70)
    assert central_crop_rect(50, 60) == CropRect(0, 0, 50, 60)
