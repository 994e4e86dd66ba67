"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--size N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from dralab import _pykernels

try:
    from dralab import _ckernels
except ImportError:
    _ckernels = None


def cases(size, rng):
    v = rng.exponential(size=(size, 3))
    top, second = _pykernels.top_two(v)
    v1 = np.ascontiguousarray(v[:, 0])
    m, m2 = _pykernels.top_two(v[:, 1:])
    grid = np.geomspace(0.5, 12.0, 8)
    mgrid = 0.25 * 1.25 ** np.arange(24)
    u = rng.random(size // 10)
    return {
        "top_two": lambda k: k.top_two(v),
        "prefix_grid": lambda k: k.prefix_grid(top, second, grid, 1.0, 1.0, True),
        "malleable_grid": lambda k: k.malleable_grid(top, second, mgrid, False, 0.0, 1.0, 1.0,
                                                     False),
        "alpha_tail": lambda k: k.alpha_tail(v1, m, m2, 4.0, 1.0, 1.0),
        "ultra_quantile (n/10)": lambda k: k.ultra_quantile(u),
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    table = cases(args.size, np.random.default_rng(0))
    print(f"{'kernel':24s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in table.items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:24s} {py:10.2f} {'n/a':>10s}")
            continue
        c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:24s} {py:10.2f} {c:10.2f} {py / c:7.1f}x")


if __name__ == "__main__":
    main()
