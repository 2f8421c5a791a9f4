"""The adjustment library: 33 single-parameter ops over three stages.

Stage 1 ("lighting") holds the six tonal ops, stage 2 ("global color")
the three whole-image color ops, stage 3 ("color bands") one hue,
luminance and saturation op per hue band.  Every op takes one integer in
[-100, +100] with 0 as the identity; negating the value reverses the
edit (exactly for the gain-style ops, within tolerance for the masked
ones, and only up to clipping everywhere).
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import UnknownOp, ValueOutOfRange, WrongSpace
from .imagecore import ColorSpace, ImageBuffer, _finalize

VALUE_MIN = -100
VALUE_MAX = 100

STAGE_LIGHTING = 1
STAGE_COLOR = 2
STAGE_BANDS = 3
STAGE_NAMES = {1: "lighting", 2: "global color", 3: "color bands"}

EXACT = "exact"
APPROXIMATE = "approximate"

#: Hue band centers in degrees; windows reach to the adjacent centers.
BANDS = (
    ("red", 0.0),
    ("orange", 30.0),
    ("yellow", 60.0),
    ("green", 120.0),
    ("aqua", 180.0),
    ("blue", 240.0),
    ("purple", 280.0),
    ("magenta", 320.0),
)
BAND_NAMES = tuple(name for name, _ in BANDS)


def _band_window(index):
    n = len(BANDS)
    lo = BANDS[(index - 1) % n][1]
    center = BANDS[index][1]
    hi = BANDS[(index + 1) % n][1]
    return lo, center, hi


@dataclass(frozen=True)
class Adjustment:
    """One op applied at one strength."""

    op: str
    value: int

    def __post_init__(self):
        if self.op not in _INDEX:
            raise UnknownOp(f"no such op: {self.op!r}")
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise ValueOutOfRange(f"value must be an integer, got {v!r}")
        v = int(v)
        if v < VALUE_MIN or v > VALUE_MAX:
            raise ValueOutOfRange(f"value {v} outside [-100, +100]")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class OpDescriptor:
    """Registry entry; doubles as the op's documentation for planners."""

    name: str
    stage: int
    invertibility: str
    doc: str

    value_range = (VALUE_MIN, VALUE_MAX)
    identity = 0


_GLOBAL_OPS = [
    # (name, stage, invertibility, doc)
    ("blacks", 1, APPROXIMATE,
     "Lift or crush the darkest tones; the shift fades with the fourth "
     "power of distance from black."),
    ("contrast", 1, EXACT,
     "Scale tonal separation around middle gray in gamma space."),
    ("exposure", 1, EXACT,
     "Multiply linear light; +50 is one stop up, -50 one stop down."),
    ("highlights", 1, APPROXIMATE,
     "Brighten or recover the upper tones through a quadratic "
     "luminance mask."),
    ("whites", 1, APPROXIMATE,
     "Push or pull the extreme top end; the quartic mask leaves "
     "midtones alone."),
    ("shadows", 1, APPROXIMATE,
     "Open up or deepen the lower midtones through a quadratic mask."),
    ("saturation", 2, EXACT,
     "Scale chroma around luminance in linear light; -100 lands on "
     "grayscale."),
    ("temperature", 2, EXACT,
     "Warm (+) or cool (-) the image by counter-rotating the red and "
     "blue channels."),
    ("tint", 2, EXACT,
     "Shift the green-magenta balance; positive moves toward magenta."),
]

_BAND_KIND_DOC = {
    "hue": "Rotate {band} hues toward a neighboring band, up to 30 degrees "
           "at full strength.",
    "luminance": "Brighten or darken {band} pixels in proportion to how "
                 "saturated they are.",
    "saturation": "Intensify or mute {band} chroma; other hues and "
                  "neutrals stay put.",
}
_BAND_KIND_CLASS = {
    "hue": EXACT,
    "luminance": APPROXIMATE,
    "saturation": APPROXIMATE,
}


def _build_registry():
    descs = []
    dispatch = {}
    for name, stage, inv, doc in _GLOBAL_OPS:
        descs.append(OpDescriptor(name, stage, inv, doc))
        dispatch[name] = ("global", name)
    for kind in ("hue", "luminance", "saturation"):
        for idx, (band, _) in enumerate(BANDS):
            name = f"{kind}_{band}"
            doc = _BAND_KIND_DOC[kind].format(band=band)
            descs.append(
                OpDescriptor(name, STAGE_BANDS, _BAND_KIND_CLASS[kind], doc)
            )
            dispatch[name] = ("band", kind, idx)
    return tuple(descs), dispatch


REGISTRY, _DISPATCH = _build_registry()
_INDEX = {d.name: i for i, d in enumerate(REGISTRY)}


def list_ops(stage=None):
    """Registry descriptors in canonical order, optionally one stage."""
    if stage is None:
        return REGISTRY
    return tuple(d for d in REGISTRY if d.stage == stage)


def get_op(name: str) -> OpDescriptor:
    try:
        return REGISTRY[_INDEX[name]]
    except KeyError:
        raise UnknownOp(f"no such op: {name!r}") from None


def registry_index(name: str) -> int:
    try:
        return _INDEX[name]
    except KeyError:
        raise UnknownOp(f"no such op: {name!r}") from None


def stage_of(name: str) -> int:
    return get_op(name).stage


def _sat_gain(v: float) -> float:
    # Reciprocal boost branch keeps +v / -v an exact inverse pair; the
    # floor keeps +100 finite while staying monotone at the test points.
    if v <= 0.0:
        return 1.0 + v / 100.0
    return 1.0 / max(1.0 - v / 100.0, 0.05)


def _apply_global(x01, name, v):
    if name == "contrast":
        f = np.float32(2.0 ** (v / 100.0))
        return np.float32(0.5) + (x01 - np.float32(0.5)) * f
    if name in ("blacks", "whites", "shadows", "highlights"):
        one_minus = name in ("blacks", "shadows")
        power = 4 if name in ("blacks", "whites") else 2
        return kernels.tone_masked_shift(x01, v / 250.0, one_minus, power)
    lin = kernels.srgb_to_linear(x01)
    if name == "exposure":
        lin = lin * np.float32(2.0 ** (v / 50.0))
    elif name == "saturation":
        y = (
            kernels.LUMA_R * lin[:, :, 0]
            + kernels.LUMA_G * lin[:, :, 1]
            + kernels.LUMA_B * lin[:, :, 2]
        )[:, :, None]
        lin = y + (lin - y) * np.float32(_sat_gain(v))
    elif name == "temperature":
        lin = lin.copy()
        lin[:, :, 0] *= np.float32(2.0 ** (v / 200.0))
        lin[:, :, 2] *= np.float32(2.0 ** (-v / 200.0))
    elif name == "tint":
        lin = lin.copy()
        lin[:, :, 1] *= np.float32(2.0 ** (-v / 200.0))
    return kernels.linear_to_srgb(np.clip(lin, 0.0, 1.0).astype(np.float32))


def _apply_band(x01, kind, band_idx, v):
    lo, center, hi = _band_window(band_idx)
    lin = kernels.srgb_to_linear(x01)
    if kind == "hue":
        out = kernels.band_hue(lin, lo, center, hi, (v / 100.0) * 30.0)
    elif kind == "saturation":
        out = kernels.band_sat(lin, lo, center, hi, v / 100.0)
    else:
        out = kernels.band_lum(lin, lo, center, hi, v / 200.0)
    return kernels.linear_to_srgb(out)


def apply(img: ImageBuffer, adj: Adjustment) -> ImageBuffer:
    """Apply one adjustment to an encoded-sRGB buffer.

    Value 0 returns the input samples untouched.  Output samples are
    clamped to the 16-bit range only at the end of the op.
    """
    if not isinstance(adj, Adjustment):
        adj = Adjustment(*adj)
    if img.space is not ColorSpace.ENCODED_SRGB:
        raise WrongSpace("apply expects an encoded-sRGB buffer")
    if adj.value == 0:
        return ImageBuffer(img.data, img.space)
    x01 = img.data * np.float32(1.0 / 65535.0)
    spec = _DISPATCH[adj.op]
    if spec[0] == "global":
        out01 = _apply_global(x01, spec[1], adj.value)
    else:
        out01 = _apply_band(x01, spec[1], spec[2], adj.value)
    return _finalize(out01, ColorSpace.ENCODED_SRGB)


def invert(adj: Adjustment) -> Adjustment:
    """The adjustment that (approximately) undoes ``adj``."""
    return Adjustment(adj.op, -adj.value)


def canonical_order(adjs):
    """Stable sort by registry position (stage-major)."""
    return sorted(adjs, key=lambda a: registry_index(a.op))


def apply_sequence(img: ImageBuffer, adjs) -> ImageBuffer:
    """Fold ``apply`` over the adjustments in canonical order."""
    out = img
    for adj in canonical_order(adjs):
        out = apply(out, adj)
    return out


def band_memberships(hues_deg: np.ndarray) -> np.ndarray:
    """Window weight of every band at the given hues; shape (8, N)."""
    h = np.asarray(hues_deg, dtype=np.float64).ravel()
    rows = []
    for idx in range(len(BANDS)):
        lo, center, hi = _band_window(idx)
        rows.append(np.asarray(kernels.band_weight(h, lo, center, hi)))
    return np.stack(rows, axis=0)


def newly_clipped_fraction(before: ImageBuffer, after: ImageBuffer) -> float:
    """Fraction of samples an edit drove onto the 0/65535 rails."""
    rail_b = (before.data <= 0.0) | (before.data >= 65535.0)
    rail_a = (after.data <= 0.0) | (after.data >= 65535.0)
    return float((rail_a & ~rail_b).mean())


def verify_invertibility(img, values, clip_exempt_fraction=0.001):
    """Round-trip every op at the given magnitudes; report PSNR per case.

    Returns a list of dict rows ``{op, value, psnr_db, clipped_fraction,
    exempt, floor_db, ok}``.  A case is exempt when the forward edit
    drives more than ``clip_exempt_fraction`` of samples onto a rail.
    """
    from .metrics import psnr_db

    rows = []
    for desc in REGISTRY:
        floor = 50.0 if desc.invertibility == EXACT else 35.0
        for v in values:
            fwd = apply(img, Adjustment(desc.name, int(v)))
            back = apply(fwd, Adjustment(desc.name, -int(v)))
            clipped = newly_clipped_fraction(img, fwd)
            score = psnr_db(img, back)
            exempt = clipped > clip_exempt_fraction
            rows.append(
                {
                    "op": desc.name,
                    "value": int(v),
                    "psnr_db": score,
                    "clipped_fraction": clipped,
                    "exempt": exempt,
                    "floor_db": floor,
                    "ok": exempt or score >= floor,
                }
            )
    return rows


def export_op_docs() -> str:
    """The op library as a structured text document for external planners."""
    payload = {
        "value_scale": (
            "every op takes one integer value in [-100, +100]; 0 leaves "
            "the image untouched; negating a value reverses the edit"
        ),
        "stages": {str(k): v for k, v in STAGE_NAMES.items()},
        "ops": [
            {
                "name": d.name,
                "stage": d.stage,
                "invertibility": d.invertibility,
                "doc": d.doc,
            }
            for d in REGISTRY
        ],
    }
    return json.dumps(payload, indent=2)
