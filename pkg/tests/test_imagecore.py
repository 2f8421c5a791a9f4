"""Image buffer, codec and statistics behavior."""

import numpy as np
import pytest

from retouchkit.errors import (
    CorruptStream,
    DimensionMismatch,
    UnsupportedLayout,
    WrongSpace,
)
from retouchkit.imagecore import (
    HIST_BINS,
    WHITE,
    ColorSpace,
    ImageBuffer,
    ImageFormat,
    compute_stats,
    decode,
    encode,
    load_image,
    require_same_shape,
    save_image,
    to_encoded,
    to_linear,
)

from conftest import synth_image


def _flat(value, shape=(8, 8, 3), space=ColorSpace.ENCODED_SRGB):
    return ImageBuffer(np.full(shape, value, dtype=np.float32), space)


class TestImageBuffer:
    def test_rejects_wrong_rank(self):
        with pytest.raises(UnsupportedLayout):
            ImageBuffer(np.zeros((8, 8), dtype=np.float32),
                        ColorSpace.ENCODED_SRGB)

    def test_rejects_wrong_channel_count(self):
        with pytest.raises(UnsupportedLayout):
            ImageBuffer(np.zeros((8, 8, 4), dtype=np.float32),
                        ColorSpace.ENCODED_SRGB)

    def test_rejects_non_finite(self):
        data = np.zeros((4, 4, 3), dtype=np.float32)
        data[0, 0, 0] = np.nan
        with pytest.raises(UnsupportedLayout):
            ImageBuffer(data, ColorSpace.ENCODED_SRGB)

    def test_rejects_out_of_range(self):
        with pytest.raises(UnsupportedLayout):
            _flat(65536.0)
        with pytest.raises(UnsupportedLayout):
            _flat(-1.0)

    def test_rejects_bad_space(self):
        with pytest.raises(WrongSpace):
            ImageBuffer(np.zeros((4, 4, 3), dtype=np.float32), "srgb")

    def test_samples_are_read_only(self):
        img = _flat(100.0)
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0

    def test_coerces_dtype_and_layout(self):
        data = np.zeros((4, 4, 3), dtype=np.float64)[:, ::1]
        img = ImageBuffer(data, ColorSpace.ENCODED_SRGB)
        assert img.data.dtype == np.float32
        assert img.data.flags["C_CONTIGUOUS"]

    def test_same_samples(self, midtone):
        twin = ImageBuffer(midtone.data, midtone.space)
        assert midtone.same_samples(twin)
        assert not midtone.same_samples(_flat(0.0, midtone.data.shape))


class TestCodec:
    def test_png16_round_trip_is_exact(self, midtone, tmp_path):
        path = tmp_path / "img.png"
        save_image(midtone, path)
        back = load_image(path)
        quantized = np.rint(midtone.data)
        assert np.array_equal(back.data, quantized)

    def test_tiff16_round_trip_is_exact(self, midtone):
        blob = encode(midtone, ImageFormat.TIFF16)
        back = decode(blob)
        assert np.array_equal(back.data, np.rint(midtone.data))

    def test_8bit_input_scales_by_257(self, tmp_path):
        import cv2

        eight = np.arange(0, 256, dtype=np.uint8).reshape(16, 16)
        eight = np.dstack([eight, eight, eight])
        path = str(tmp_path / "eight.png")
        cv2.imwrite(path, eight)
        img = load_image(path)
        assert img.data.max() == 255 * 257 == 65535
        assert img.data.min() == 0.0

    def test_grayscale_file_becomes_three_channels(self, tmp_path):
        import cv2

        gray = np.full((10, 12), 77, dtype=np.uint8)
        path = str(tmp_path / "gray.png")
        cv2.imwrite(path, gray)
        img = load_image(path)
        assert img.data.shape == (10, 12, 3)
        assert np.all(img.data == 77 * 257)

    def test_channel_order_survives_codec(self, tmp_path):
        data = np.zeros((4, 4, 3), dtype=np.float32)
        data[..., 0] = 65535.0
        red = ImageBuffer(data, ColorSpace.ENCODED_SRGB)
        back = decode(encode(red))
        assert back.data[0, 0, 0] == 65535.0
        assert back.data[0, 0, 2] == 0.0

    def test_truncated_stream_raises(self, midtone):
        blob = encode(midtone)
        with pytest.raises(CorruptStream):
            decode(blob[: len(blob) // 3])

    def test_empty_and_non_bytes_streams_raise(self):
        with pytest.raises(CorruptStream):
            decode(b"")
        with pytest.raises(CorruptStream):
            decode("not bytes")

    def test_encode_requires_known_format(self, midtone):
        with pytest.raises(UnsupportedLayout):
            encode(midtone, "png")


class TestTransfer:
    def test_round_trip_stays_within_half_unit(self, midtone):
        back = to_encoded(to_linear(midtone))
        err = np.abs(back.data.astype(np.float64) - midtone.data)
        assert err.max() < 0.5

    def test_mid_gray_golden(self):
        # closed form: ((0.5000076 + 0.055) / 1.055) ** 2.4
        img = _flat(32768.0)
        lin = to_linear(img)
        assert abs(lin.data[0, 0, 0] / WHITE - 0.2140482) < 1e-6

    def test_dark_segment_is_linear(self):
        img = _flat(WHITE * 0.003)
        lin = to_linear(img)
        assert abs(lin.data[0, 0, 0] / WHITE - 0.003 / 12.92) < 1e-7

    def test_space_guards(self, midtone):
        lin = to_linear(midtone)
        with pytest.raises(WrongSpace):
            to_linear(lin)
        with pytest.raises(WrongSpace):
            to_encoded(midtone)


class TestStats:
    def test_histograms_are_normalized(self, midtone):
        stats = compute_stats(midtone)
        for hist in (stats.luminance_hist, stats.saturation_hist,
                     stats.contrast_hist):
            assert hist.shape == (HIST_BINS,)
            assert abs(hist.sum() - 1.0) < 1e-6
            assert hist.min() >= 0.0

    def test_black_image_lands_in_bin_zero(self):
        stats = compute_stats(_flat(0.0))
        assert stats.luminance_hist[0] == 1.0
        assert stats.saturation_hist[0] == 1.0
        assert stats.contrast_hist[0] == 1.0

    def test_white_image_luminance_tops_out(self):
        stats = compute_stats(_flat(WHITE))
        assert stats.luminance_hist[HIST_BINS - 1] == 1.0
        # a flat field has no local contrast anywhere
        assert stats.contrast_hist[0] == 1.0

    def test_checkerboard_contrast_saturates(self):
        data = np.zeros((16, 16, 3), dtype=np.float32)
        data[::2, 1::2] = WHITE
        data[1::2, ::2] = WHITE
        stats = compute_stats(ImageBuffer(data, ColorSpace.ENCODED_SRGB))
        assert stats.contrast_hist[HIST_BINS - 1] > 0.99

    def test_grayscale_has_zero_saturation(self):
        stats = compute_stats(_flat(WHITE / 3))
        assert stats.saturation_hist[0] == 1.0

    def test_stats_require_encoded_space(self, midtone):
        with pytest.raises(WrongSpace):
            compute_stats(to_linear(midtone))

    def test_require_same_shape(self, midtone):
        other = synth_image(1, height=10, width=10)
        with pytest.raises(DimensionMismatch):
            require_same_shape(midtone, other)
