#!/usr/bin/env python3
"""Time the compiled compressor kernel against the pure-Python fallback.

The compressor's branch smoother is the one per-sample recursion in the
engine, so it dominates candidate evaluation cost. This script checks
that both backends agree numerically, then reports median wall time per
backend over a few repeats.

Usage:
    python3 benchmarks/bench_kernels.py [--seconds 30] [--repeats 5]
"""

import argparse
import statistics
import time

import numpy as np

from automix import _kernels_py

try:
    from automix import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

FS = 44100.0
DRC = {"threshold_db": -24.0, "ratio": 4.0, "attack_s": 0.01, "release_s": 0.2}


def bench(fn, x, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(x, FS, **DRC)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seconds", type=float, default=30.0, help="signal length")
    parser.add_argument("--repeats", type=int, default=5, help="timed repeats per backend")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    x = 0.25 * rng.standard_normal(int(args.seconds * FS))

    y_py, gr_py = _kernels_py.compress_signal(x, FS, **DRC)
    t_py = bench(_kernels_py.compress_signal, x, args.repeats)
    n = len(x)
    print(f"signal: {args.seconds:g} s ({n} samples), median of {args.repeats} runs")
    print(f"  python  {t_py * 1e3:8.1f} ms  ({n / t_py / 1e6:6.1f} Msamples/s)")

    if _kernels_c is None:
        print("  cython  not built (pip install -e . to compile)")
        return

    y_c, gr_c = _kernels_c.compress_signal(x, FS, **DRC)
    err = max(float(np.max(np.abs(y_c - y_py))), float(np.max(np.abs(gr_c - gr_py))))
    t_c = bench(_kernels_c.compress_signal, x, args.repeats)
    print(f"  cython  {t_c * 1e3:8.1f} ms  ({n / t_c / 1e6:6.1f} Msamples/s)")
    print(f"  speedup x{t_py / t_c:.1f}, max abs disagreement {err:.2e}")


if __name__ == "__main__":
    main()
