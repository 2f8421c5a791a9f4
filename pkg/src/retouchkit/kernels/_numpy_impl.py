"""Vectorized numpy implementations of the per-pixel kernels.

This is the fallback path used when numba is unavailable or disabled via
``RETOUCHKIT_NO_NUMBA``.  Every function here has a numba twin with the same
signature in ``_numba_impl``; keep the math in sync.

All image arguments are float32 arrays in the normalized [0, 1] domain.
Masked tone shifts and hue rotations are solved implicitly for negative
amounts so that a +v/-v pair inverts exactly on unclipped pixels.
"""

import numpy as np
import scipy.ndimage as ndi

BACKEND = "numpy"

#: Rec. 709 luma weights.
LUMA_R = 0.2126
LUMA_G = 0.7152
LUMA_B = 0.0722

_SOLVE_ITERS = 48
#: Floor for the reciprocal saturation gain so +100 stays finite.
_SAT_GAIN_FLOOR = 0.05


def _luma(img):
    return (
        LUMA_R * img[..., 0] + LUMA_G * img[..., 1] + LUMA_B * img[..., 2]
    )


def srgb_to_linear(x):
    """Piecewise sRGB EOTF, encoded [0,1] -> linear [0,1]."""
    x = np.asarray(x, dtype=np.float32)
    lo = x / 12.92
    hi = ((x + 0.055) / 1.055) ** 2.4
    return np.where(x <= 0.04045, lo, hi).astype(np.float32)


def linear_to_srgb(x):
    """Inverse sRGB transfer, linear [0,1] -> encoded [0,1]."""
    x = np.asarray(x, dtype=np.float32)
    lo = x * 12.92
    hi = 1.055 * np.power(x, 1.0 / 2.4) - 0.055
    return np.where(x <= 0.0031308, lo, hi).astype(np.float32)


def _mask(y, one_minus, power):
    # Mask argument saturates at the rails so the implicit solver keeps a
    # valid bracket even when the pre-clamp shift leaves [0, 1].
    t = np.clip(y, 0.0, 1.0)
    if one_minus:
        t = 1.0 - t
    t2 = t * t
    return t2 if power == 2 else t2 * t2


def tone_masked_shift(img, amount, one_minus, power):
    """Add ``amount * w(Y)`` to every channel in gamma space.

    Positive amounts use the source luminance mask directly.  Negative
    amounts solve ``Y_out = Y_in + amount * w(Y_out)`` per pixel so the
    negated value reverses the positive edit exactly (before clamping).
    """
    y = _luma(img).astype(np.float64)
    if amount >= 0.0:
        shift = amount * _mask(y, one_minus, power)
    else:
        lo = y + amount
        hi = y.copy()
        for _ in range(_SOLVE_ITERS):
            mid = 0.5 * (lo + hi)
            f = mid - amount * _mask(mid, one_minus, power) - y
            gt = f > 0.0
            hi = np.where(gt, mid, hi)
            lo = np.where(gt, lo, mid)
        y_out = 0.5 * (lo + hi)
        shift = amount * _mask(y_out, one_minus, power)
    out = img.astype(np.float64) + shift[..., None]
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def band_weight(h_deg, lo, center, hi):
    """Membership of hue ``h_deg`` in the cosine window (lo, center, hi).

    The window peaks at 1 on its center and falls to 0 at the neighboring
    centers with a cos^2 profile; adjacent windows sum to 1.
    """
    h = np.asarray(h_deg, dtype=np.float64)
    d = (h - center + 180.0) % 360.0 - 180.0
    gap_r = (hi - center) % 360.0
    gap_l = (center - lo) % 360.0
    t = np.where(d >= 0.0, d / gap_r, -d / gap_l)
    w = np.cos(np.pi * t / 2.0) ** 2
    return np.where(t < 1.0, w, 0.0)


def _rgb_to_hsv(a):
    # a: (N, 3) float64 with chroma > 0 guaranteed by the caller.
    r, g, b = a[:, 0], a[:, 1], a[:, 2]
    maxc = a.max(axis=1)
    minc = a.min(axis=1)
    c = maxc - minc
    s = c / maxc
    hr = ((g - b) / c) % 6.0
    hg = (b - r) / c + 2.0
    hb = (r - g) / c + 4.0
    h = 60.0 * np.where(maxc == r, hr, np.where(maxc == g, hg, hb))
    return h % 360.0, s, maxc


def _hsv_to_rgb(h, s, v):
    h6 = (h % 360.0) / 60.0
    i = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=1)


def _active_hsv(img, lo, center, hi):
    flat = img.reshape(-1, 3).astype(np.float64)
    maxc = flat.max(axis=1)
    minc = flat.min(axis=1)
    sat_ok = maxc > minc
    idx = np.nonzero(sat_ok)[0]
    if idx.size == 0:
        return flat, idx, None, None, None, None
    h, s, v = _rgb_to_hsv(flat[idx])
    w = band_weight(h, lo, center, hi)
    keep = w > 0.0
    idx = idx[keep]
    return flat, idx, h[keep], s[keep], v[keep], w[keep]


def band_hue(img, lo, center, hi, k_deg):
    """Rotate in-band hues by up to ``k_deg`` degrees, weighted by membership.

    Negative rotations are solved implicitly against the output hue so the
    negated amount undoes the positive one exactly.
    """
    flat, idx, h, s, v, w = _active_hsv(img, lo, center, hi)
    if idx.size:
        if k_deg >= 0.0:
            h_out = h + k_deg * w
        else:
            b_lo = h + k_deg
            b_hi = h.copy()
            for _ in range(_SOLVE_ITERS):
                mid = 0.5 * (b_lo + b_hi)
                f = mid - k_deg * band_weight(mid, lo, center, hi) - h
                gt = f > 0.0
                b_hi = np.where(gt, mid, b_hi)
                b_lo = np.where(gt, b_lo, mid)
            h_out = 0.5 * (b_lo + b_hi)
        flat[idx] = _hsv_to_rgb(h_out % 360.0, s, v)
    out = np.clip(flat, 0.0, 1.0).astype(np.float32)
    return out.reshape(img.shape)


def band_sat(img, lo, center, hi, x):
    """Scale in-band saturation; ``x`` is value/100.

    The cut direction applies gain ``1 + x*w`` (vanishing at -100 on the
    band center); the boost direction applies the reciprocal so the pair
    inverts exactly until the gain floor or the S=1 rail interferes.
    """
    flat, idx, h, s, v, w = _active_hsv(img, lo, center, hi)
    if idx.size:
        if x <= 0.0:
            gain = 1.0 + x * w
        else:
            gain = 1.0 / np.maximum(1.0 - x * w, _SAT_GAIN_FLOOR)
        s_out = np.clip(s * gain, 0.0, 1.0)
        flat[idx] = _hsv_to_rgb(h, s_out, v)
    out = np.clip(flat, 0.0, 1.0).astype(np.float32)
    return out.reshape(img.shape)


def band_lum(img, lo, center, hi, e):
    """Scale in-band brightness by ``2^(e * w * S)``; ``e`` is value/200.

    Pure gain on the pixel leaves hue and saturation fixed, so negation
    inverts exactly on unclipped pixels.
    """
    flat, idx, h, s, v, w = _active_hsv(img, lo, center, hi)
    if idx.size:
        gain = np.exp2(e * w * s)
        flat[idx] *= gain[:, None]
    out = np.clip(flat, 0.0, 1.0).astype(np.float32)
    return out.reshape(img.shape)


def michelson3x3(y):
    """Per-pixel Michelson contrast over a 3x3 neighborhood.

    Borders replicate the edge row/column.
    """
    y = np.asarray(y, dtype=np.float32)
    mx = ndi.maximum_filter(y, size=3, mode="nearest")
    mn = ndi.minimum_filter(y, size=3, mode="nearest")
    return ((mx - mn) / (mx + mn + 1e-6)).astype(np.float32)
