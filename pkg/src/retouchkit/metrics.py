"""Fidelity metrics between 16-bit buffers: PSNR, SSIM, histogram overlap.

PSNR and SSIM run on the stored samples (16-bit domain, MAX = 65535);
histogram intersection runs on the three ``compute_stats`` histograms
and is reported on a 0-100 scale.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi

from . import kernels
from .errors import TooSmall, WrongSpace
from .imagecore import (
    ImageBuffer,
    PixelStats,
    compute_stats,
    require_same_shape,
)

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
_MAX = 65535.0


def _check_pair(a: ImageBuffer, b: ImageBuffer) -> None:
    require_same_shape(a, b)
    if a.space is not b.space:
        raise WrongSpace(
            f"cannot compare {a.space.value} against {b.space.value}"
        )


def psnr_db(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99.

    The cap value is returned exactly when the buffers are
    sample-identical (MSE of zero).
    """
    _check_pair(a, b)
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(_MAX * _MAX / mse), PSNR_CAP_DB)


def _luma64(img: ImageBuffer) -> np.ndarray:
    d = img.data.astype(np.float64)
    return (
        kernels.LUMA_R * d[:, :, 0]
        + kernels.LUMA_G * d[:, :, 1]
        + kernels.LUMA_B * d[:, :, 2]
    )


def _gaussian_window() -> np.ndarray:
    r = SSIM_WINDOW // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean structural similarity of the luma planes.

    Gaussian 11x11 window (sigma 1.5), averaged over every position
    where the full window fits; images must be at least 11 px per side.
    """
    _check_pair(a, b)
    if min(a.height, a.width) < SSIM_WINDOW:
        raise TooSmall(
            f"ssim needs at least {SSIM_WINDOW} px per side, "
            f"got {a.height}x{a.width}"
        )
    ya = _luma64(a)
    yb = _luma64(b)
    win = _gaussian_window()
    r = SSIM_WINDOW // 2

    def w(x):
        return ndi.correlate(x, win, mode="nearest")[r:-r, r:-r]

    mu_a = w(ya)
    mu_b = w(yb)
    var_a = w(ya * ya) - mu_a * mu_a
    var_b = w(yb * yb) - mu_b * mu_b
    cov = w(ya * yb) - mu_a * mu_b
    c1 = (SSIM_K1 * _MAX) ** 2
    c2 = (SSIM_K2 * _MAX) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class HistScores:
    """Histogram intersection per statistic, each on a 0-100 scale."""

    luminance: float
    saturation: float
    contrast: float

    @property
    def mean(self) -> float:
        return (self.luminance + self.saturation + self.contrast) / 3.0

    def as_dict(self) -> dict:
        return {
            "luminance": self.luminance,
            "saturation": self.saturation,
            "contrast": self.contrast,
            "mean": self.mean,
        }


def _stats_of(x) -> PixelStats:
    return x if isinstance(x, PixelStats) else compute_stats(x)


def hist_intersection(a, b) -> HistScores:
    """Overlap of the luminance/saturation/contrast histograms.

    Accepts buffers or precomputed ``PixelStats``; 100 means identical
    distributions, 0 means disjoint.
    """
    sa = _stats_of(a)
    sb = _stats_of(b)

    def overlap(ha, hb):
        return 100.0 * float(np.minimum(ha, hb).sum())

    return HistScores(
        luminance=overlap(sa.luminance_hist, sb.luminance_hist),
        saturation=overlap(sa.saturation_hist, sb.saturation_hist),
        contrast=overlap(sa.contrast_hist, sb.contrast_hist),
    )


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    ssim: float
    hist: HistScores

    def as_dict(self) -> dict:
        return {
            "psnr_db": self.psnr_db,
            "ssim": self.ssim,
            "hist_intersection": self.hist.as_dict(),
        }


def compare(pred: ImageBuffer, target: ImageBuffer) -> MetricReport:
    return MetricReport(
        psnr_db=psnr_db(pred, target),
        ssim=ssim(pred, target),
        hist=hist_intersection(pred, target),
    )


def reduce_best(pred: ImageBuffer, targets) -> MetricReport:
    """Score against several targets: best PSNR/SSIM, mean histogram.

    PSNR and SSIM take the most favorable target; histogram scores are
    averaged over all of them.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("reduce_best needs at least one target")
    reports = [compare(pred, t) for t in targets]
    hs = [r.hist for r in reports]
    n = float(len(hs))
    return MetricReport(
        psnr_db=max(r.psnr_db for r in reports),
        ssim=max(r.ssim for r in reports),
        hist=HistScores(
            luminance=sum(h.luminance for h in hs) / n,
            saturation=sum(h.saturation for h in hs) / n,
            contrast=sum(h.contrast for h in hs) / n,
        ),
    )
