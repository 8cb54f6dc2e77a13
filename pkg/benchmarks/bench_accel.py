#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Run with the default (jitted) path:

    python3 benchmarks/bench_accel.py

The env flag VOXMINE_NUMBA=0 switches the package-level selection; this
script times both implementations directly in one process so the comparison
shares identical inputs.
"""

import argparse
import time

import numpy as np

from voxmine import accel


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - started)
    return best, result


def bench_mcd(n, d, n_starts, repeat):
    rng = np.random.default_rng(0)
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    X[: n // 10] += 8.0
    starts = np.stack(
        [rng.choice(n, size=d + 1, replace=False) for _ in range(n_starts)]
    ).astype(np.int64)
    h = (n + d + 1 + 1) // 2

    rows = []
    t_np, (s_np, det_np, v_np) = _time(
        accel._mcd_trials_numpy, X, starts, h, 100, 1e-12, repeat=repeat
    )
    rows.append(("numpy", t_np, det_np))
    if accel.NUMBA_ENABLED:
        accel._mcd_trials_jit(X, starts, h, 100, 1e-12)  # compile outside the timer
        t_jit, (s_jit, det_jit, v_jit) = _time(
            accel._mcd_trials_jit, X, starts, h, 100, 1e-12, repeat=repeat
        )
        rows.append(("numba", t_jit, det_jit))
        assert np.array_equal(s_np, s_jit) and v_np == v_jit == 0
    return rows


def bench_smooth(n_frames, repeat):
    rng = np.random.default_rng(1)
    flags = (rng.random(n_frames) < 0.35).astype(np.uint8)
    rows = []
    t_np, out_np = _time(accel._smooth_gaps_numpy, flags, 30, repeat=repeat)
    rows.append(("numpy", t_np, int(out_np.sum())))
    if accel.NUMBA_ENABLED:
        accel._smooth_gaps_jit(flags, 30)
        t_jit, out_jit = _time(accel._smooth_gaps_jit, flags, 30, repeat=repeat)
        rows.append(("numba", t_jit, int(out_jit.sum())))
        assert np.array_equal(out_np, out_jit)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    print(f"numba enabled: {accel.NUMBA_ENABLED}")
    workloads = [
        ("fastmcd n=200 d=4 starts=500", lambda: bench_mcd(200, 4, 500, args.repeat)),
        ("fastmcd n=1000 d=2 starts=500", lambda: bench_mcd(1000, 2, 500, args.repeat)),
        ("fastmcd n=2000 d=8 starts=200", lambda: bench_mcd(2000, 8, 200, args.repeat)),
        ("vad smoothing 1h of frames", lambda: bench_smooth(360_000, args.repeat)),
    ]
    for name, runner in workloads:
        rows = runner()
        base = rows[0][1]
        print(f"\n{name}")
        for impl, seconds, check in rows:
            speedup = base / seconds if seconds > 0 else float("inf")
            print(f"  {impl:>6}: {seconds * 1e3:9.2f} ms   ({speedup:5.1f}x vs numpy)   check={check}")


if __name__ == "__main__":
    main()
