"""Compare the compiled table kernel with the numpy fallback.

Usage: python benchmarks/bench_kernel.py [--repeats N]

Prints best-of-N wall time per table shape and the speedup.  Both kernels
must produce bit-identical tables; the script checks that as it goes.
"""

import argparse
import time

import numpy as np

from hhpim.kernel import KERNELS, build_table

SHAPES = [  # (spaces, items K, steps)
    (2, 50, 200),
    (2, 100, 1000),
    (4, 100, 2000),
    (2, 32, 1166),  # ResNet-18 HP cluster at the calibrated grid
]


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    if "compiled" not in KERNELS:
        print("compiled kernel not built; only the python kernel is available")
        return 1
    print(f"{'n':>3} {'K':>5} {'steps':>6} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for n, K, steps in SHAPES:
        t_units = np.arange(1, n + 1) * 3
        energy = 100.0 / np.arange(1, n + 1)
        caps = np.full(n, K)
        tp, a = best_of(lambda: build_table(t_units, energy, caps, K, steps, kernel="python"), args.repeats)
        tc, b = best_of(lambda: build_table(t_units, energy, caps, K, steps, kernel="compiled"), args.repeats)
        assert all(np.array_equal(x, y) for x, y in zip(a, b)), "kernels disagree"
        print(f"{n:>3} {K:>5} {steps:>6} {tp * 1e3:>10.3f} {tc * 1e3:>12.3f} {tp / tc:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
