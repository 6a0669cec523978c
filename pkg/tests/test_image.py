import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image as PILImage

from pixshuf.errors import DimensionError, FormatError, IoError
from pixshuf.image import (
    Image,
    build_pyramid,
    downsample2x,
    load_image,
    max_pyramid_levels,
    quantize,
    resize_bilinear,
    save_image,
    to_luma,
)

unit_floats = st.floats(0.0, 1.0, allow_nan=False)


def small_images(channels=st.sampled_from([1, 3]), max_side=12):
    return st.tuples(st.integers(1, max_side), st.integers(1, max_side), channels).flatmap(
        lambda s: arrays(np.float64, s, elements=unit_floats)
    )


def test_image_stores_hwc_and_clips():
    img = Image(np.array([[-0.5, 0.5], [1.5, 1.0]]))
    assert img.shape == (2, 2, 1)
    assert img.data.min() == 0.0 and img.data.max() == 1.0
    with pytest.raises(ValueError):
        Image(np.array([[np.nan]]))
    with pytest.raises(DimensionError):
        Image(np.zeros((2, 2, 2)))


def test_image_is_immutable():
    img = Image(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0


def test_load_gray_png_bytes(tmp_path):
    p = tmp_path / "g.png"
    PILImage.fromarray(np.array([[0, 128], [255, 64]], dtype=np.uint8)).save(p)
    img = load_image(p)
    assert img.shape == (2, 2, 1)
    np.testing.assert_allclose(img.data.ravel(), [0.0, 0.50196, 1.0, 0.25098], atol=1e-5)


def test_load_drops_alpha(tmp_path):
    p = tmp_path / "rgba.png"
    arr = np.zeros((3, 4, 4), dtype=np.uint8)
    arr[..., 0] = 200
    arr[..., 3] = 17
    PILImage.fromarray(arr).save(p)
    img = load_image(p)
    assert img.channels == 3
    assert np.all(img.data[..., 0] == 200 / 255)

    pa = tmp_path / "la.png"
    PILImage.fromarray(arr[..., [0, 3]]).save(pa)
    assert load_image(pa).channels == 1


def test_load_missing_file_raises_ioerror(tmp_path):
    with pytest.raises(IoError):
        load_image(tmp_path / "nope.png")


def test_load_garbage_raises_formaterror(tmp_path):
    p = tmp_path / "junk.png"
    p.write_bytes(b"definitely not an image")
    with pytest.raises(FormatError):
        load_image(p)


def test_load_16bit_png_rejected(tmp_path):
    p = tmp_path / "deep.png"
    PILImage.fromarray(np.full((2, 2), 40000, dtype=np.uint16)).save(p)
    with pytest.raises(FormatError):
        load_image(p)


@pytest.mark.parametrize("value, byte", [(1.0, 255), (0.5, 128), (1.2, 255), (0.0, 0), (-0.3, 0)])
def test_quantize_rule(value, byte):
    assert quantize(np.array([value]))[0] == byte


def test_save_clamps_out_of_range_array(tmp_path):
    p = tmp_path / "c.png"
    save_image(np.array([[1.2, -0.1]]), p)
    assert np.asarray(PILImage.open(p)).tolist() == [[255, 0]]


@pytest.mark.parametrize("suffix", [".png", ".pgm", ".ppm"])
@pytest.mark.parametrize("channels", [1, 3])
def test_roundtrip_all_256_levels(tmp_path, suffix, channels):
    if suffix == ".pgm" and channels == 3:
        pytest.skip("PGM is single-channel")
    levels = np.arange(256, dtype=np.float64) / 255.0
    data = np.stack([np.roll(levels, k) for k in range(channels)], axis=-1).reshape(16, 16, channels)
    img = Image(data)
    p = tmp_path / f"rt{suffix}"
    save_image(img, p)
    back = load_image(p)
    if suffix == ".ppm" and channels == 1:
        back = Image(back.data[..., :1])
    assert back == img


def test_pnm_rejects_other_maxval(tmp_path):
    p = tmp_path / "m.pgm"
    p.write_bytes(b"P5\n2 1\n65535\n" + b"\x00" * 4)
    with pytest.raises(FormatError):
        load_image(p)


def test_pnm_header_comments_and_truncation(tmp_path):
    p = tmp_path / "c.ppm"
    p.write_bytes(b"P6\n# a comment\n1 1\n255\n" + bytes([10, 20, 30]))
    np.testing.assert_array_equal(load_image(p).data.ravel() * 255, [10, 20, 30])
    p.write_bytes(b"P6\n2 2\n255\n" + bytes(5))
    with pytest.raises(FormatError):
        load_image(p)


def test_save_to_unwritable_location(tmp_path):
    with pytest.raises(IoError):
        save_image(Image(np.zeros((2, 2))), tmp_path / "missing-dir" / "x.png")


def test_luma_weights():
    img = Image(np.array([[[1.0, 1.0, 1.0], [1.0, 0.0, 0.0]]]))
    y = to_luma(img)
    assert y.channels == 1
    assert y.data[0, 0, 0] == pytest.approx(1.0, abs=1e-15)
    assert y.data[0, 1, 0] == pytest.approx(0.299, abs=1e-15)


def test_luma_of_gray_is_identity():
    img = Image(np.random.default_rng(0).random((5, 4)))
    assert to_luma(img) == img


@given(small_images(st.just(3)))
@settings(max_examples=60, deadline=None)
def test_luma_range(data):
    y = to_luma(Image(data)).data
    assert y.min() >= 0.0 and y.max() <= 1.0


def test_resize_identity_and_midpoint():
    img = Image(np.random.default_rng(1).random((5, 7, 3)))
    assert resize_bilinear(img, 7, 5) == img
    ramp = Image(np.array([[0.0, 1.0]]))
    np.testing.assert_allclose(resize_bilinear(ramp, 3, 1).data.ravel(), [0.0, 0.5, 1.0], atol=0)


@given(small_images(), st.integers(1, 20), st.integers(1, 20))
@settings(max_examples=80, deadline=None)
def test_resize_stays_within_input_range(data, w, h):
    out = resize_bilinear(Image(data), w, h).data
    assert out.shape[:2] == (h, w)
    assert out.min() >= data.min()
    assert out.max() <= data.max()


@given(unit_floats, st.integers(1, 9), st.integers(1, 9), st.integers(1, 20), st.integers(1, 20))
@settings(max_examples=60, deadline=None)
def test_resize_and_downsample_preserve_constants(value, w, h, nw, nh):
    img = Image(np.full((h, w, 3), value))
    np.testing.assert_allclose(resize_bilinear(img, nw, nh).data, value, atol=1e-12)
    if w >= 2 and h >= 2:
        np.testing.assert_allclose(downsample2x(img).data, value, atol=1e-12)


def test_downsample_examples():
    img = Image(np.array([[0.0, 0.2], [0.4, 0.6]]))
    assert downsample2x(img).data.ravel() == pytest.approx([0.3], abs=1e-15)
    odd = np.arange(9, dtype=float).reshape(3, 3) / 10
    out = downsample2x(Image(odd))
    assert out.shape == (1, 1, 1)
    assert out.data[0, 0, 0] == pytest.approx(odd[:2, :2].mean())
    with pytest.raises(DimensionError):
        downsample2x(Image(np.zeros((1, 4))))


def test_pyramid_levels():
    assert max_pyramid_levels(64, 64) == 4  # 64, 32, 16, 8
    assert max_pyramid_levels(256, 256) == 6
    assert max_pyramid_levels(5, 100) == 1
    pyr = build_pyramid(Image(np.zeros((64, 40))), 3)
    assert [(p.width, p.height) for p in pyr] == [(40, 64), (20, 32), (10, 16)]
