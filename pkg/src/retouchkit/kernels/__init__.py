"""Hot per-pixel kernels with a numba fast path and a numpy fallback.

The numba path is used when importable; set ``RETOUCHKIT_NO_NUMBA=1`` to
force the pure-numpy implementations.  ``BACKEND`` reports which one won.
Both implementations share signatures and math; ``tests/test_kernels.py``
holds them to numerical agreement and ``benchmarks/bench_kernels.py``
compares their throughput.
"""

import os
import warnings

_disabled = os.environ.get("RETOUCHKIT_NO_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

# numba warns when the installed TBB is too old for its threading layer
# and silently falls back; that is fine for us and noisy for CLI users.
warnings.filterwarnings(
    "ignore", message=".*TBB.*", category=Warning, module="numba.*"
)

if not _disabled:
    try:
        from . import _numba_impl as _impl
    except ImportError:
        from . import _numpy_impl as _impl
else:
    from . import _numpy_impl as _impl

BACKEND = _impl.BACKEND
LUMA_R = _impl.LUMA_R
LUMA_G = _impl.LUMA_G
LUMA_B = _impl.LUMA_B

srgb_to_linear = _impl.srgb_to_linear
linear_to_srgb = _impl.linear_to_srgb
tone_masked_shift = _impl.tone_masked_shift
band_weight = _impl.band_weight
band_hue = _impl.band_hue
band_sat = _impl.band_sat
band_lum = _impl.band_lum
michelson3x3 = _impl.michelson3x3

__all__ = [
    "BACKEND",
    "LUMA_R",
    "LUMA_G",
    "LUMA_B",
    "srgb_to_linear",
    "linear_to_srgb",
    "tone_masked_shift",
    "band_weight",
    "band_hue",
    "band_sat",
    "band_lum",
    "michelson3x3",
]
