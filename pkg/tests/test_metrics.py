"""Reference metrics: PSNR, SSIM, histogram intersection."""

import numpy as np
import pytest

from retouchkit.errors import DimensionMismatch, TooSmall, WrongSpace
from retouchkit.imagecore import ColorSpace, ImageBuffer, to_linear
from retouchkit.metrics import (
    PSNR_CAP_DB,
    SSIM_SIGMA,
    SSIM_WINDOW,
    compare,
    hist_intersection,
    psnr_db,
    reduce_best,
    ssim,
)

from conftest import synth_image


def _offset(img, units):
    data = np.clip(img.data.astype(np.float64) + units, 0.0, 65535.0)
    return ImageBuffer(data.astype(np.float32), img.space)


def _noisy(img, sigma_units, seed=0):
    rng = np.random.default_rng(seed)
    data = img.data.astype(np.float64) + rng.normal(
        0.0, sigma_units, img.data.shape
    )
    return ImageBuffer(
        np.clip(data, 0.0, 65535.0).astype(np.float32), img.space
    )


class TestPsnr:
    def test_identity_caps_at_99(self, midtone):
        assert psnr_db(midtone, midtone) == PSNR_CAP_DB

    def test_uniform_one_8bit_step_golden(self):
        # offset every sample by 257 units within a rail-free image
        base = synth_image(3, lo=0.1, hi=0.9)
        shifted = _offset(base, 257.0)
        assert psnr_db(base, shifted) == pytest.approx(
            48.1308036086791, abs=1e-4
        )

    def test_cap_clamps_raw_values_above_99(self, midtone):
        barely = _offset(midtone, 0.01)
        assert psnr_db(midtone, barely) == PSNR_CAP_DB

    def test_values_below_the_cap_are_not_touched(self, midtone):
        data = midtone.data.copy()
        data[0, 0, 0] = min(65535.0, data[0, 0, 0] + 300.0)
        one_off = ImageBuffer(data, midtone.space)
        value = psnr_db(midtone, one_off)
        assert 90.0 < value < PSNR_CAP_DB

    def test_symmetry(self, midtone):
        other = synth_image(9)
        assert psnr_db(midtone, other) == psnr_db(other, midtone)

    def test_shape_guard(self, midtone):
        with pytest.raises(DimensionMismatch):
            psnr_db(midtone, synth_image(0, height=10, width=10))

    def test_space_guard(self, midtone):
        with pytest.raises(WrongSpace):
            psnr_db(midtone, to_linear(midtone))


def _ssim_bruteforce(a, b):
    """Direct per-window SSIM on the valid region; the test oracle."""
    from retouchkit.metrics import _luma64

    x = _luma64(a) / 65535.0
    y = _luma64(b) / 65535.0
    r = SSIM_WINDOW // 2
    ax = np.arange(SSIM_WINDOW) - r
    g = np.exp(-(ax ** 2) / (2.0 * SSIM_SIGMA ** 2))
    w = np.outer(g, g)
    w /= w.sum()
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    h, wd = x.shape
    vals = []
    for i in range(r, h - r):
        for j in range(r, wd - r):
            px = x[i - r:i + r + 1, j - r:j + r + 1]
            py = y[i - r:i + r + 1, j - r:j + r + 1]
            mx = (w * px).sum()
            my = (w * py).sum()
            vx = (w * px * px).sum() - mx * mx
            vy = (w * py * py).sum() - my * my
            cxy = (w * px * py).sum() - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


class TestSsim:
    def test_identity_is_one(self, midtone):
        assert ssim(midtone, midtone) == pytest.approx(1.0, abs=1e-6)

    def test_matches_bruteforce_oracle(self):
        a = synth_image(11, height=20, width=24)
        b = synth_image(12, height=20, width=24)
        assert ssim(a, b) == pytest.approx(_ssim_bruteforce(a, b), abs=1e-6)

    def test_degrades_with_noise(self, midtone):
        clean = ssim(midtone, midtone)
        noisy = ssim(midtone, _noisy(midtone, 8 * 257.0))
        assert noisy < clean

    def test_too_small_raises(self):
        tiny = synth_image(1, height=10, width=10)
        with pytest.raises(TooSmall):
            ssim(tiny, tiny)

    def test_window_edge_exactly_11_works(self):
        edge = synth_image(2, height=11, width=11)
        assert ssim(edge, edge) == pytest.approx(1.0, abs=1e-6)


class TestHistIntersection:
    def test_identity_is_100(self, midtone):
        scores = hist_intersection(midtone, midtone)
        assert scores.luminance == 100.0
        assert scores.saturation == 100.0
        assert scores.contrast == 100.0
        assert scores.mean == 100.0

    def test_disjoint_luminance_is_zero(self):
        black = ImageBuffer(
            np.zeros((16, 16, 3), dtype=np.float32), ColorSpace.ENCODED_SRGB
        )
        white = ImageBuffer(
            np.full((16, 16, 3), 65535.0, dtype=np.float32),
            ColorSpace.ENCODED_SRGB,
        )
        scores = hist_intersection(black, white)
        assert scores.luminance == 0.0
        # both are colorless and flat, so the other histograms agree
        assert scores.saturation == 100.0
        assert scores.contrast == 100.0

    def test_scores_are_bounded(self, midtone):
        scores = hist_intersection(midtone, synth_image(21))
        for v in (scores.luminance, scores.saturation, scores.contrast):
            assert 0.0 <= v <= 100.0


class TestReductionsAndReports:
    def test_compare_report_shape(self, midtone):
        report = compare(midtone, synth_image(5))
        doc = report.as_dict()
        assert set(doc) == {"psnr_db", "ssim", "hist_intersection"}
        assert set(doc["hist_intersection"]) == {
            "luminance", "saturation", "contrast", "mean"
        }

    def test_reduce_best_takes_max_quality_and_mean_hist(self, midtone):
        near = _noisy(midtone, 257.0, seed=1)
        far = synth_image(40)
        best = reduce_best(midtone, [far, near])
        assert best.psnr_db == compare(midtone, near).psnr_db
        assert best.ssim == compare(midtone, near).ssim
        lum = (
            compare(midtone, near).hist.luminance
            + compare(midtone, far).hist.luminance
        ) / 2.0
        assert best.hist.luminance == pytest.approx(lum, abs=1e-9)

    def test_reduce_best_rejects_empty_targets(self, midtone):
        with pytest.raises(ValueError):
            reduce_best(midtone, [])

    def test_noise_sweep_degrades_every_metric(self, midtone):
        sigmas = [1, 2, 4, 8]
        reports = [
            compare(midtone, _noisy(midtone, s * 257.0, seed=s))
            for s in sigmas
        ]
        psnrs = [r.psnr_db for r in reports]
        ssims = [r.ssim for r in reports]
        hists = [r.hist.mean for r in reports]
        assert all(a > b for a, b in zip(psnrs, psnrs[1:]))
        assert all(a > b for a, b in zip(ssims, ssims[1:]))
        assert all(a >= b for a, b in zip(hists, hists[1:]))
