"""Selects the table-building kernel at import time.

The compiled extension is used when it was built; ``HHPIM_KERNEL=python``
forces the numpy fallback.
"""

import os
import time

import numpy as np

from hhpim import _dpkernel_py

try:
    from hhpim import _dpkernel as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNELS = {"python": _dpkernel_py}
if _compiled is not None:
    KERNELS["compiled"] = _compiled

if os.environ.get("HHPIM_KERNEL", "").lower() == "python" or _compiled is None:
    KERNEL_NAME = "python"
else:
    KERNEL_NAME = "compiled"


def get_kernel(name=None):
    name = name or KERNEL_NAME
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} not available (have {sorted(KERNELS)})") from None


def build_table(t_units, energy, caps, K, steps, kernel=None):
    fn = get_kernel(kernel).build_table
    return fn(np.ascontiguousarray(t_units, dtype=np.int64),
              np.ascontiguousarray(energy, dtype=np.float64),
              np.ascontiguousarray(caps, dtype=np.int64),
              int(K), int(steps))


def combine_trace(best_a, cnt_a, tu_a, best_b, cnt_b, tu_b, K, kernel=None):
    fn = get_kernel(kernel).combine_trace
    as_i64 = lambda a: np.ascontiguousarray(a, dtype=np.int64)
    return fn(np.ascontiguousarray(best_a), cnt_a, as_i64(tu_a),
              None if best_b is None else np.ascontiguousarray(best_b), cnt_b,
              None if tu_b is None else as_i64(tu_b), int(K))


_throughput_cache = {}


def measure_throughput(kernel=None, repeats=3):
    """Return ``(overhead_s, cells_per_s)`` for the kernel on this machine.

    Fits a two-point line through best-of-``repeats`` timings of a small and
    a larger two-space table.
    """
    name = kernel or KERNEL_NAME
    if name in _throughput_cache:
        return _throughput_cache[name]
    t_units = np.array([3, 5])
    energy = np.array([7.0, 2.0])
    caps = np.array([1 << 30, 1 << 30])
    sizes = [(8, 64), (64, 512)] if name == "compiled" else [(4, 64), (24, 256)]
    points = []
    for K, steps in sizes:
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            build_table(t_units, energy, caps, K, steps, kernel=name)
            best = min(best, time.perf_counter() - t0)
        points.append((2 * (K + 1) * (steps + 1), best))
    (c0, s0), (c1, s1) = points
    rate = (c1 - c0) / max(s1 - s0, 1e-9)
    overhead = max(s0 - c0 / rate, 0.0)
    _throughput_cache[name] = (overhead, rate)
    return overhead, rate
