"""16-bit RGB image buffers, codec round trips, and pixel statistics.

Samples live in 16-bit units [0, 65535] but are carried as float32 so a
chain of adjustments only quantizes once, at encode time.  Buffers are
immutable: the backing array is marked read-only and every operation
returns a fresh buffer.
"""

import enum
from dataclasses import dataclass

import cv2
import numpy as np

from . import kernels
from .errors import (
    CorruptStream,
    DimensionMismatch,
    UnsupportedLayout,
    WrongSpace,
)

WHITE = 65535.0
HIST_BINS = 64
#: Stabilizer in the Michelson denominator.
CONTRAST_EPS = 1e-6


class ColorSpace(enum.Enum):
    ENCODED_SRGB = "encoded_srgb"
    LINEAR_RGB = "linear_rgb"


class ImageFormat(enum.Enum):
    PNG16 = "png16"
    TIFF16 = "tiff16"


_FORMAT_EXT = {ImageFormat.PNG16: ".png", ImageFormat.TIFF16: ".tiff"}


@dataclass(frozen=True)
class ImageBuffer:
    """An RGB raster plus the color space its samples are expressed in."""

    data: np.ndarray
    space: ColorSpace = ColorSpace.ENCODED_SRGB

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise UnsupportedLayout(
                f"expected (height, width, 3) samples, got shape {arr.shape}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise UnsupportedLayout("empty raster")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.isfinite(arr).all():
            raise UnsupportedLayout("non-finite samples")
        mn = float(arr.min())
        mx = float(arr.max())
        if mn < 0.0 or mx > WHITE:
            raise UnsupportedLayout(
                f"samples outside [0, 65535]: min={mn}, max={mx}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        if not isinstance(self.space, ColorSpace):
            raise WrongSpace(f"not a color space: {self.space!r}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def same_samples(self, other: "ImageBuffer") -> bool:
        return self.space is other.space and np.array_equal(
            self.data, other.data
        )


def _finalize(x01: np.ndarray, space: ColorSpace) -> ImageBuffer:
    # The float32 transfer curves can overshoot the rails by an ulp; pin
    # them before scaling back to 16-bit units.
    arr = np.clip(x01, 0.0, 1.0).astype(np.float32) * np.float32(WHITE)
    return ImageBuffer(arr, space)


def decode(stream: bytes) -> ImageBuffer:
    """Decode PNG/TIFF bytes into an encoded-sRGB buffer.

    Accepts 8- or 16-bit depths and 1-4 channels; grayscale is broadcast
    to RGB, alpha is dropped, 8-bit samples are scaled by 257.
    """
    if not isinstance(stream, (bytes, bytearray, memoryview)):
        raise CorruptStream(f"expected bytes, got {type(stream).__name__}")
    if len(stream) == 0:
        raise CorruptStream("empty stream")
    raw = np.frombuffer(stream, dtype=np.uint8)
    img = cv2.imdecode(raw, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise CorruptStream("stream did not decode as an image")
    if img.dtype == np.uint8:
        scale = 257.0
    elif img.dtype == np.uint16:
        scale = 1.0
    else:
        raise UnsupportedLayout(f"unsupported sample type {img.dtype}")
    if img.ndim == 2:
        img = np.stack([img, img, img], axis=2)
    elif img.ndim == 3 and img.shape[2] == 2:
        # gray + alpha
        img = np.stack([img[:, :, 0]] * 3, axis=2)
    elif img.ndim == 3 and img.shape[2] in (3, 4):
        img = cv2.cvtColor(
            img,
            cv2.COLOR_BGRA2RGB if img.shape[2] == 4 else cv2.COLOR_BGR2RGB,
        )
    else:
        raise UnsupportedLayout(f"unsupported channel layout {img.shape}")
    data = img.astype(np.float32) * np.float32(scale)
    return ImageBuffer(data, ColorSpace.ENCODED_SRGB)


def encode(img: ImageBuffer, fmt: ImageFormat = ImageFormat.PNG16) -> bytes:
    """Encode to 16-bit PNG or TIFF bytes, quantizing the float samples.

    Linear buffers are converted to encoded sRGB first.
    """
    if not isinstance(fmt, ImageFormat):
        raise UnsupportedLayout(f"unknown image format: {fmt!r}")
    if img.space is ColorSpace.LINEAR_RGB:
        img = to_encoded(img)
    q = np.clip(np.rint(img.data), 0.0, WHITE).astype(np.uint16)
    bgr = cv2.cvtColor(q, cv2.COLOR_RGB2BGR)
    ok, buf = cv2.imencode(_FORMAT_EXT[fmt], bgr)
    if not ok:
        raise CorruptStream(f"encoder rejected buffer for {fmt.value}")
    return buf.tobytes()


def load_image(path) -> ImageBuffer:
    with open(path, "rb") as fh:
        return decode(fh.read())


def save_image(img: ImageBuffer, path) -> None:
    name = str(path).lower()
    fmt = ImageFormat.TIFF16 if name.endswith((".tif", ".tiff")) else ImageFormat.PNG16
    with open(path, "wb") as fh:
        fh.write(encode(img, fmt))


def to_linear(img: ImageBuffer) -> ImageBuffer:
    """Apply the sRGB EOTF; requires an encoded buffer."""
    if img.space is not ColorSpace.ENCODED_SRGB:
        raise WrongSpace("to_linear expects an encoded-sRGB buffer")
    x = img.data * np.float32(1.0 / WHITE)
    return _finalize(kernels.srgb_to_linear(x), ColorSpace.LINEAR_RGB)


def to_encoded(img: ImageBuffer) -> ImageBuffer:
    """Apply the inverse sRGB transfer; requires a linear buffer."""
    if img.space is not ColorSpace.LINEAR_RGB:
        raise WrongSpace("to_encoded expects a linear-RGB buffer")
    x = img.data * np.float32(1.0 / WHITE)
    return _finalize(kernels.linear_to_srgb(x), ColorSpace.ENCODED_SRGB)


@dataclass(frozen=True)
class PixelStats:
    """Normalized 64-bin histograms plus scalar means, all in [0, 1]."""

    mean_luminance: float
    mean_saturation: float
    luminance_hist: np.ndarray
    saturation_hist: np.ndarray
    contrast_hist: np.ndarray


def _hist64(values: np.ndarray) -> np.ndarray:
    idx = np.minimum(
        (values * HIST_BINS).astype(np.int64), HIST_BINS - 1
    )
    counts = np.bincount(idx.ravel(), minlength=HIST_BINS)
    out = counts.astype(np.float64) / values.size
    out.flags.writeable = False
    return out


def hsv_saturation(img: ImageBuffer) -> np.ndarray:
    """Per-pixel HSV saturation of the stored samples, in [0, 1]."""
    maxc = img.data.max(axis=2)
    minc = img.data.min(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(maxc > 0.0, (maxc - minc) / maxc, 0.0)
    return s.astype(np.float64)


def linear_luminance(img: ImageBuffer) -> np.ndarray:
    """Per-pixel Rec. 709 luminance of the linearized pixels, in [0, 1]."""
    lin = img if img.space is ColorSpace.LINEAR_RGB else to_linear(img)
    x = lin.data * np.float32(1.0 / WHITE)
    return (
        kernels.LUMA_R * x[:, :, 0]
        + kernels.LUMA_G * x[:, :, 1]
        + kernels.LUMA_B * x[:, :, 2]
    ).astype(np.float64)


def compute_stats(img: ImageBuffer) -> PixelStats:
    """Histogram luminance, saturation and local contrast of a buffer.

    Luminance is Rec. 709 luma of the linearized pixels; saturation is
    HSV S of the stored samples; contrast is 3x3 Michelson contrast of
    the luminance plane.  Each statistic is binned into 64 normalized
    buckets.  Pixel order does not matter.
    """
    if img.space is not ColorSpace.ENCODED_SRGB:
        raise WrongSpace("compute_stats expects an encoded-sRGB buffer")
    lum = linear_luminance(img)
    sat = hsv_saturation(img)
    contrast = kernels.michelson3x3(lum.astype(np.float32)).astype(np.float64)
    return PixelStats(
        mean_luminance=float(lum.mean()),
        mean_saturation=float(sat.mean()),
        luminance_hist=_hist64(np.clip(lum, 0.0, 1.0)),
        saturation_hist=_hist64(np.clip(sat, 0.0, 1.0)),
        contrast_hist=_hist64(np.clip(contrast, 0.0, 1.0)),
    )


def require_same_shape(a: ImageBuffer, b: ImageBuffer) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionMismatch(
            f"shape {a.data.shape} vs {b.data.shape}"
        )
