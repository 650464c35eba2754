"""Time the compiled and numpy quadrature kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--n 20 40 80] [--repeats 20]

Prints one line per (kernel, mesh) with the median seconds per call for
each backend, the speedup, and the max difference between their outputs.
"""
import argparse
import statistics
import time

import numpy as np

from fracttm.kernels import backend


def _median_time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _cases(n, rng):
    h = 1.0 / n
    Up = np.zeros((n + 1, n + 1))
    Up[1:-1, 1:-1] = rng.uniform(-1.0, 1.0, (n - 1, n - 1))
    Q = np.ascontiguousarray(rng.uniform(-1.0, 1.0, (n, n, 3, 3)))
    S = np.ascontiguousarray(rng.uniform(-1.0, 1.0, (3, 3, n + 1, n + 1)))
    return {
        "cell_quad_values": lambda k: k.cell_quad_values(Up),
        "quad_load": lambda k: k.quad_load(Q, h, h),
        "quad_mass_stencil": lambda k: k.quad_mass_stencil(Q, h, h),
        "stencil_apply": lambda k: k.stencil_apply(S, Up),
        "allen_cahn_terms": lambda k: k.allen_cahn_terms(Up, h, h, True),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[20, 40, 80], help="cells per direction")
    p.add_argument("--repeats", type=int, default=20)
    args = p.parse_args(argv)
    try:
        fast = backend("cython")
    except ImportError:
        print("compiled kernels unavailable; build with `pip install -e . --no-build-isolation`")
        return 1
    slow = backend("python")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'n':>5}{'python_s':>12}{'cython_s':>12}{'speedup':>9}{'max_diff':>11}")
    for n in args.n:
        for name, call in _cases(n, rng).items():
            tp = _median_time(lambda: call(slow), args.repeats)
            tc = _median_time(lambda: call(fast), args.repeats)
            diff = _max_diff(call(slow), call(fast))
            print(f"{name:<20}{n:>5}{tp:>12.3e}{tc:>12.3e}{tp / tc:>9.2f}{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
