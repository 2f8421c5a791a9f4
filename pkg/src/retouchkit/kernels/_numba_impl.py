"""Numba JIT implementations of the per-pixel kernels.

Same signatures and math as ``_numpy_impl``; see that module for the
contracts.  Loops are row-parallel and compiled with on-disk caching so
repeat runs skip compilation.
"""

import math

import numpy as np
from numba import njit, prange

BACKEND = "numba"

LUMA_R = 0.2126
LUMA_G = 0.7152
LUMA_B = 0.0722

_SOLVE_ITERS = 48
_SAT_GAIN_FLOOR = 0.05


@njit(cache=True, fastmath=True)
def _clamp01(v):
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


@njit(cache=True, parallel=True, fastmath=True)
def srgb_to_linear(x):
    h, w, c = x.shape
    out = np.empty_like(x)
    for i in prange(h):
        for j in range(w):
            for k in range(c):
                v = x[i, j, k]
                if v <= 0.04045:
                    out[i, j, k] = v / 12.92
                else:
                    out[i, j, k] = ((v + 0.055) / 1.055) ** 2.4
    return out


@njit(cache=True, parallel=True, fastmath=True)
def linear_to_srgb(x):
    h, w, c = x.shape
    out = np.empty_like(x)
    for i in prange(h):
        for j in range(w):
            for k in range(c):
                v = x[i, j, k]
                if v <= 0.0031308:
                    out[i, j, k] = v * 12.92
                else:
                    out[i, j, k] = 1.055 * v ** (1.0 / 2.4) - 0.055
    return out


@njit(cache=True)
def _mask_scalar(y, one_minus, power):
    t = y
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    if one_minus:
        t = 1.0 - t
    t2 = t * t
    if power == 2:
        return t2
    return t2 * t2


@njit(cache=True, parallel=True)
def tone_masked_shift(img, amount, one_minus, power):
    h, w, _ = img.shape
    out = np.empty_like(img)
    for i in prange(h):
        for j in range(w):
            r = float(img[i, j, 0])
            g = float(img[i, j, 1])
            b = float(img[i, j, 2])
            y = LUMA_R * r + LUMA_G * g + LUMA_B * b
            if amount >= 0.0:
                shift = amount * _mask_scalar(y, one_minus, power)
            else:
                lo = y + amount
                hi = y
                for _ in range(_SOLVE_ITERS):
                    mid = 0.5 * (lo + hi)
                    f = mid - amount * _mask_scalar(mid, one_minus, power) - y
                    if f > 0.0:
                        hi = mid
                    else:
                        lo = mid
                y_out = 0.5 * (lo + hi)
                shift = amount * _mask_scalar(y_out, one_minus, power)
            out[i, j, 0] = _clamp01(r + shift)
            out[i, j, 1] = _clamp01(g + shift)
            out[i, j, 2] = _clamp01(b + shift)
    return out


@njit(cache=True)
def _w_scalar(hue, lo, center, hi):
    d = (hue - center + 180.0) % 360.0 - 180.0
    if d >= 0.0:
        gap = (hi - center) % 360.0
        t = d / gap
    else:
        gap = (center - lo) % 360.0
        t = -d / gap
    if t >= 1.0:
        return 0.0
    cv = math.cos(math.pi * t / 2.0)
    return cv * cv


@njit(cache=True)
def band_weight(h_arr, lo, center, hi):
    out = np.empty(h_arr.shape[0], dtype=np.float64)
    for n in range(h_arr.shape[0]):
        out[n] = _w_scalar(h_arr[n], lo, center, hi)
    return out


@njit(cache=True)
def _hue_of(r, g, b, maxc, c):
    if maxc == r:
        hh = ((g - b) / c) % 6.0
    elif maxc == g:
        hh = (b - r) / c + 2.0
    else:
        hh = (r - g) / c + 4.0
    return (60.0 * hh) % 360.0


@njit(cache=True)
def _store_hsv(out, i, j, hue, s, v):
    h6 = (hue % 360.0) / 60.0
    sector = int(math.floor(h6)) % 6
    f = h6 - math.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    if sector == 0:
        r, g, b = v, t, p
    elif sector == 1:
        r, g, b = q, v, p
    elif sector == 2:
        r, g, b = p, v, t
    elif sector == 3:
        r, g, b = p, q, v
    elif sector == 4:
        r, g, b = t, p, v
    else:
        r, g, b = v, p, q
    out[i, j, 0] = _clamp01(r)
    out[i, j, 1] = _clamp01(g)
    out[i, j, 2] = _clamp01(b)


@njit(cache=True, parallel=True)
def band_hue(img, lo, center, hi, k_deg):
    h, w, _ = img.shape
    out = np.empty_like(img)
    for i in prange(h):
        for j in range(w):
            r = float(img[i, j, 0])
            g = float(img[i, j, 1])
            b = float(img[i, j, 2])
            maxc = max(r, g, b)
            minc = min(r, g, b)
            c = maxc - minc
            if c <= 0.0:
                out[i, j, 0] = img[i, j, 0]
                out[i, j, 1] = img[i, j, 1]
                out[i, j, 2] = img[i, j, 2]
                continue
            hue = _hue_of(r, g, b, maxc, c)
            wgt = _w_scalar(hue, lo, center, hi)
            if wgt <= 0.0:
                out[i, j, 0] = img[i, j, 0]
                out[i, j, 1] = img[i, j, 1]
                out[i, j, 2] = img[i, j, 2]
                continue
            if k_deg >= 0.0:
                h_out = hue + k_deg * wgt
            else:
                b_lo = hue + k_deg
                b_hi = hue
                for _ in range(_SOLVE_ITERS):
                    mid = 0.5 * (b_lo + b_hi)
                    f = mid - k_deg * _w_scalar(mid, lo, center, hi) - hue
                    if f > 0.0:
                        b_hi = mid
                    else:
                        b_lo = mid
                h_out = 0.5 * (b_lo + b_hi)
            _store_hsv(out, i, j, h_out % 360.0, c / maxc, maxc)
    return out


@njit(cache=True, parallel=True)
def band_sat(img, lo, center, hi, x):
    h, w, _ = img.shape
    out = np.empty_like(img)
    for i in prange(h):
        for j in range(w):
            r = float(img[i, j, 0])
            g = float(img[i, j, 1])
            b = float(img[i, j, 2])
            maxc = max(r, g, b)
            minc = min(r, g, b)
            c = maxc - minc
            if c <= 0.0:
                out[i, j, 0] = img[i, j, 0]
                out[i, j, 1] = img[i, j, 1]
                out[i, j, 2] = img[i, j, 2]
                continue
            hue = _hue_of(r, g, b, maxc, c)
            wgt = _w_scalar(hue, lo, center, hi)
            if wgt <= 0.0:
                out[i, j, 0] = img[i, j, 0]
                out[i, j, 1] = img[i, j, 1]
                out[i, j, 2] = img[i, j, 2]
                continue
            if x <= 0.0:
                gain = 1.0 + x * wgt
            else:
                den = 1.0 - x * wgt
                if den < _SAT_GAIN_FLOOR:
                    den = _SAT_GAIN_FLOOR
                gain = 1.0 / den
            s_out = (c / maxc) * gain
            if s_out < 0.0:
                s_out = 0.0
            elif s_out > 1.0:
                s_out = 1.0
            _store_hsv(out, i, j, hue, s_out, maxc)
    return out


@njit(cache=True, parallel=True)
def band_lum(img, lo, center, hi, e):
    h, w, _ = img.shape
    out = np.empty_like(img)
    for i in prange(h):
        for j in range(w):
            r = float(img[i, j, 0])
            g = float(img[i, j, 1])
            b = float(img[i, j, 2])
            maxc = max(r, g, b)
            minc = min(r, g, b)
            c = maxc - minc
            if c <= 0.0:
                out[i, j, 0] = img[i, j, 0]
                out[i, j, 1] = img[i, j, 1]
                out[i, j, 2] = img[i, j, 2]
                continue
            hue = _hue_of(r, g, b, maxc, c)
            wgt = _w_scalar(hue, lo, center, hi)
            if wgt <= 0.0:
                out[i, j, 0] = img[i, j, 0]
                out[i, j, 1] = img[i, j, 1]
                out[i, j, 2] = img[i, j, 2]
                continue
            gain = 2.0 ** (e * wgt * (c / maxc))
            out[i, j, 0] = _clamp01(r * gain)
            out[i, j, 1] = _clamp01(g * gain)
            out[i, j, 2] = _clamp01(b * gain)
    return out


@njit(cache=True, parallel=True, fastmath=True)
def michelson3x3(y):
    h, w = y.shape
    out = np.empty_like(y)
    for i in prange(h):
        for j in range(w):
            mn = y[i, j]
            mx = y[i, j]
            for di in range(-1, 2):
                ii = i + di
                if ii < 0:
                    ii = 0
                elif ii > h - 1:
                    ii = h - 1
                for dj in range(-1, 2):
                    jj = j + dj
                    if jj < 0:
                        jj = 0
                    elif jj > w - 1:
                        jj = w - 1
                    v = y[ii, jj]
                    if v < mn:
                        mn = v
                    elif v > mx:
                        mx = v
            out[i, j] = (mx - mn) / (mx + mn + 1e-6)
    return out
