"""Time the numba kernels against their numpy/scipy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``. Both implementations are
imported directly from ``dtfnet._kernels`` so one process measures both;
``DTF_DISABLE_NUMBA`` only decides which one the library uses by default.
"""

import argparse
import time

import numpy as np

from dtfnet import _kernels as K
from dtfnet._compat import HAS_NUMBA
from dtfnet.filters import _system


def best_of(fn, repeat):
    fn()  # warm-up (triggers compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, rng):
    y = rng.normal(size=n)
    acts = (rng.random(n) < 0.3).astype(np.int64)
    d, e, f = _system(n, 100.0)
    rewards = rng.normal(size=n)
    values = rng.normal(size=n)
    dones = (rng.random(n) < 0.01).astype(np.float64)
    numba_penta = K._NumbaPenta(d, e, f)
    scipy_penta = K._ScipyPenta(d, e, f)
    return {
        "penta factor+solve": (
            lambda: K._NumbaPenta(d, e, f).solve(y),
            lambda: K._ScipyPenta(d, e, f).solve(y),
        ),
        "penta solve (prefactored)": (lambda: numba_penta.solve(y), lambda: scipy_penta.solve(y)),
        "interpolate trend": (lambda: K._interp_fill_loop(y, acts), lambda: K._interp_fill_numpy(y, acts)),
        "median w=21": (lambda: K._median_loop(y, 21), lambda: K._median_numpy(y, 21)),
        "moving average w=25": (lambda: K._moving_average_loop(y, 25), lambda: K._moving_average_numpy(y, 25)),
        "gae": (
            lambda: K._gae_loop(rewards, values, dones, 0.0, 0.95, 0.95),
            lambda: K._gae_numpy(rewards, values, dones, 0.0, 0.95, 0.95),
        ),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="256,1000,10000", help="comma-separated series lengths")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not HAS_NUMBA:
        print("note: numba disabled; the 'numba' column runs the plain-Python loops")
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'n':>7s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, (fast, ref) in cases(n, rng).items():
            a = best_of(fast, args.repeat) * 1e3
            b = best_of(ref, args.repeat) * 1e3
            print(f"{name:28s} {n:7d} {a:11.4f} {b:11.4f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
