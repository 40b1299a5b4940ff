#!/usr/bin/env python3
"""Compare the numba-jitted kernels against their pure-numpy fallbacks.

The first numba call includes JIT compilation; warmup runs are excluded from
the timings. Run twice to benefit from the on-disk compile cache. Use
DDE_DISABLE_NUMBA=1 to confirm the numpy path end to end.
"""

import time

import numpy as np

from dde import _kernels


def timeit(fn, *args, repeat=5):
    fn(*args)  # warmup / JIT compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_levenshtein(rng):
    a = rng.integers(0, 500, size=3000)
    b = rng.integers(0, 500, size=3000)
    rows = [("numpy", timeit(_kernels.levenshtein_numpy, a, b))]
    if _kernels.HAVE_NUMBA:
        rows.append(("numba", timeit(_kernels.levenshtein_numba, a, b)))
    return "levenshtein 3000x3000", rows


def bench_frame_rms(rng):
    x = rng.normal(size=16000 * 600)  # 10 minutes of audio
    rows = [("numpy", timeit(_kernels.frame_rms_numpy, x, 320))]
    if _kernels.HAVE_NUMBA:
        rows.append(("numba", timeit(_kernels.frame_rms_numba, x, 320)))
    return "frame_rms 10min@16kHz", rows


def bench_f0(rng):
    fs = 16000
    t = np.arange(fs * 10) / fs
    x = np.sin(2 * np.pi * 180.0 * t) + 0.05 * rng.normal(size=t.size)
    args = (x, fs, 320, 480, 40, 267)
    rows = [("numpy", timeit(_kernels.f0_frames_numpy, *args, repeat=3))]
    if _kernels.HAVE_NUMBA:
        rows.append(("numba", timeit(_kernels.f0_frames_numba, *args, repeat=3)))
    return "f0_frames 10s@16kHz", rows


def main():
    print(f"active backend: {_kernels.backend()}")
    rng = np.random.default_rng(0)
    for bench in (bench_levenshtein, bench_frame_rms, bench_f0):
        name, rows = bench(rng)
        base = rows[0][1]
        print(f"\n{name}")
        for label, seconds in rows:
            speedup = base / seconds if seconds else float("inf")
            print(f"  {label:<6} {seconds * 1000:9.2f} ms   {speedup:5.1f}x vs numpy")


if __name__ == "__main__":
    main()
