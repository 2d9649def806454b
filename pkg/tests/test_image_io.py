import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from cmfd.image_io import (
    load_image,
    load_mask,
    resize_bicubic,
    resize_nearest_mask,
    save_mask,
    save_u16_png,
    to_grayscale,
    write_overlay,
)


def _write_png(path, arr):
    Image.fromarray(arr).save(path)


class TestLoadImage:
    def test_decodes_1x1_white_png(self, tmp_path):
        p = tmp_path / "white.png"
        _write_png(p, np.full((1, 1, 3), 255, dtype=np.uint8))
        img = load_image(p)
        assert img.shape == (1, 1, 3)
        assert (img == 255).all()

    def test_drops_alpha_channel(self, tmp_path):
        p = tmp_path / "rgba.png"
        rgba = np.zeros((4, 5, 4), dtype=np.uint8)
        rgba[..., 0] = 200
        rgba[..., 3] = 128
        _write_png(p, rgba)
        img = load_image(p)
        assert img.shape == (4, 5, 3)
        assert (img[..., 0] == 200).all()

    def test_reads_jpeg_and_bmp(self, tmp_path):
        arr = np.random.default_rng(0).integers(0, 256, (16, 24, 3), dtype=np.uint8)
        for ext in ("jpg", "bmp"):
            p = tmp_path / f"img.{ext}"
            Image.fromarray(arr).save(p)
            img = load_image(p)
            assert img.shape == (16, 24, 3)

    def test_truncated_file_error_names_path(self, tmp_path):
        p = tmp_path / "broken.png"
        p.write_bytes(b"\x89PNG\r\n\x1a\n\x00\x00trunc")
        with pytest.raises(ValueError, match="broken.png"):
            load_image(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.png"):
            load_image(tmp_path / "nope.png")


class TestToGrayscale:
    def test_white_maps_to_255(self):
        img = np.full((1, 1, 3), 255, dtype=np.uint8)
        assert to_grayscale(img)[0, 0] == 255

    def test_black_maps_to_0(self):
        img = np.zeros((1, 1, 3), dtype=np.uint8)
        assert to_grayscale(img)[0, 0] == 0

    def test_pure_red(self):
        # round(0.299 * 255) = 76
        img = np.zeros((1, 1, 3), dtype=np.uint8)
        img[..., 0] = 255
        assert to_grayscale(img)[0, 0] == 76

    @given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
    def test_luma_within_channel_range(self, r, g, b):
        img = np.array([[[r, g, b]]], dtype=np.uint8)
        v = int(to_grayscale(img)[0, 0])
        assert min(r, g, b) <= v <= max(r, g, b)


class TestResizeBicubic:
    def test_output_dimensions_at_s2(self):
        img = np.zeros((728, 1024), dtype=np.uint8)
        out = resize_bicubic(img, 2.0)
        assert out.shape == (1456, 2048)

    def test_identity_at_s1(self, textured_image):
        out = resize_bicubic(textured_image, 1.0)
        assert out.dtype == np.uint8
        np.testing.assert_array_equal(out, textured_image)

    @given(st.integers(0, 255), st.floats(0.3, 3.0))
    def test_constant_stays_constant(self, value, s):
        img = np.full((20, 17), value, dtype=np.uint8)
        out = resize_bicubic(img, s)
        assert (out == value).all()

    def test_rejects_degenerate_output(self):
        img = np.zeros((4, 4), dtype=np.uint8)
        with pytest.raises(ValueError):
            resize_bicubic(img, 0.05)

    def test_rejects_nonpositive_scale(self):
        img = np.zeros((4, 4), dtype=np.uint8)
        with pytest.raises(ValueError):
            resize_bicubic(img, 0.0)

    def test_upscale_tracks_smooth_ramp(self):
        ramp = np.tile(np.arange(0, 128, 2, dtype=np.uint8), (16, 1))
        out = resize_bicubic(ramp, 2.0)
        # interior columns should advance by about one gray level per pixel
        mid = out[8, 4:-4]
        diffs = np.diff(mid.astype(int))
        assert abs(float(diffs.mean()) - 1.0) < 0.1


class TestMaskRoundTrip:
    def test_binary_png_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        mask = rng.uniform(size=(33, 47)) > 0.7
        p = tmp_path / "mask.png"
        save_mask(mask, p)
        np.testing.assert_array_equal(load_mask(p), mask)

    def test_nearest_downscale_shape(self):
        mask = np.zeros((100, 200), dtype=bool)
        mask[10:50, 20:80] = True
        out = resize_nearest_mask(mask, (50, 100))
        assert out.shape == (50, 100)
        assert out.any()

    def test_u16_png_round_trip(self, tmp_path):
        values = np.arange(0, 65536, 257, dtype=np.uint16).reshape(16, 16)
        p = tmp_path / "deep.png"
        save_u16_png(values, p)
        back = np.asarray(Image.open(p))
        np.testing.assert_array_equal(back.astype(np.uint16), values)


def test_write_overlay_renders(tmp_path, textured_image):
    mask = np.zeros_like(textured_image, dtype=bool)
    mask[40:80, 40:80] = True
    p = tmp_path / "overlay.png"
    write_overlay(textured_image, [(10.0, 10.0, 100.0, 120.0)], mask, p)
    out = np.asarray(Image.open(p))
    assert out.shape == (*textured_image.shape, 3)
    assert (out[:, :, 1] > out[:, :, 0]).any()  # green match line present
