"""Benchmark the numba convolution kernel against the pure-numpy fallback.

Runs the dense-accumulation impulse convolution over random unit-mass
trains of growing support size and reports per-call times for both
implementations, plus a correctness cross-check on every case.

Usage::

    python3 benchmarks/bench_convolve.py [--sizes 8,32,128,512] [--repeats 200]

The active kernel in the library is chosen at import time by the
``PRUNESCHED_NO_NUMBA`` environment variable; this script imports both
implementations directly so one process can time the two side by side.
"""

import argparse
import time

import numpy as np

from prunesched import _kernels
from prunesched._kernels import _convolve_dense_np

if not _kernels.USE_NUMBA:
    raise SystemExit(
        "PRUNESCHED_NO_NUMBA is set; unset it so the numba kernel is available"
    )
from prunesched._kernels import _convolve_dense_nb


def random_train(rng, size, max_time):
    times = np.sort(rng.choice(np.arange(max_time), size=size, replace=False))
    probs = rng.random(size) + 0.01
    return times.astype(np.int64), probs / probs.sum()


def time_kernel(fn, cases, repeats):
    # warm-up covers JIT compilation for the numba path
    for a, b in cases[:2]:
        fn(*a, *b)
    t0 = time.perf_counter()
    for _ in range(repeats):
        for a, b in cases:
            fn(*a, *b)
    return (time.perf_counter() - t0) / (repeats * len(cases))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="8,32,128,512",
                    help="comma-separated impulse counts per operand")
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--cases", type=int, default=10,
                    help="random train pairs per size")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{'impulses':>9} {'numba':>12} {'numpy':>12} {'speedup':>8}")
    for size in sizes:
        cases = [
            (random_train(rng, size, size * 10), random_train(rng, size, size * 10))
            for _ in range(args.cases)
        ]
        for a, b in cases:
            t_nb, p_nb = _convolve_dense_nb(*a, *b)
            t_np, p_np = _convolve_dense_np(*a, *b)
            assert np.array_equal(t_nb, t_np)
            np.testing.assert_allclose(p_nb, p_np, rtol=0, atol=1e-15)
        nb = time_kernel(_convolve_dense_nb, cases, args.repeats)
        np_ = time_kernel(_convolve_dense_np, cases, args.repeats)
        print(f"{size:>9} {nb * 1e6:>10.1f}us {np_ * 1e6:>10.1f}us "
              f"{np_ / nb:>7.1f}x")


if __name__ == "__main__":
    main()
