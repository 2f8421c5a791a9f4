"""Throughput comparison of the numba and numpy kernel backends.

Runs every hot kernel on a large random image with both implementations
and prints per-kernel wall times plus the speedup ratio.  The numba path
is JIT-warmed before timing so compilation cost is excluded.

Usage::

    python3 benchmarks/bench_kernels.py [--pixels 12000000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from retouchkit.kernels import _numpy_impl

try:
    from retouchkit.kernels import _numba_impl
except ImportError:
    _numba_impl = None

# uniform 8-band hue window centered on red
_LO, _CENTER, _HI = 315.0, 0.0, 45.0


def _cases(img, y):
    return (
        ("srgb_to_linear", "srgb_to_linear", (img,)),
        ("linear_to_srgb", "linear_to_srgb", (img,)),
        ("tone_masked_shift +", "tone_masked_shift", (img, 0.3, True, 2)),
        ("tone_masked_shift -", "tone_masked_shift", (img, -0.3, True, 2)),
        ("band_hue +", "band_hue", (img, _LO, _CENTER, _HI, 20.0)),
        ("band_hue -", "band_hue", (img, _LO, _CENTER, _HI, -20.0)),
        ("band_sat", "band_sat", (img, _LO, _CENTER, _HI, 0.4)),
        ("band_lum", "band_lum", (img, _LO, _CENTER, _HI, 0.2)),
        ("michelson3x3", "michelson3x3", (y,)),
    )


def _best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--pixels",
        type=int,
        default=12_000_000,
        help="approximate pixel count of the benchmark image",
    )
    parser.add_argument(
        "--repeats",
        type=int,
        default=5,
        help="timed runs per kernel; the best is reported",
    )
    args = parser.parse_args()

    side = int(round(args.pixels**0.5))
    rng = np.random.default_rng(8080)
    img = rng.random((side, side, 3), dtype=np.float32)
    y = rng.random((side, side), dtype=np.float32)
    print(f"image: {side}x{side} ({side * side / 1e6:.1f} MP), "
          f"best of {args.repeats} runs")

    backends = [("numpy", _numpy_impl)]
    if _numba_impl is not None:
        for label, name, call_args in _cases(img[:64, :64], y[:64, :64]):
            getattr(_numba_impl, name)(*call_args)
        backends.append(("numba", _numba_impl))
    else:
        print("numba backend not importable; timing numpy only")

    width = max(len(label) for label, _, _ in _cases(img, y))
    header = f"{'kernel':<{width}}"
    for label, _ in backends:
        header += f"  {label + ' (ms)':>12}"
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))

    for label, name, call_args in _cases(img, y):
        times = [
            _best_of(getattr(mod, name), call_args, args.repeats)
            for _, mod in backends
        ]
        row = f"{label:<{width}}"
        for t in times:
            row += f"  {t * 1e3:>12.1f}"
        if len(times) == 2:
            row += f"  {times[0] / times[1]:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
