"""Compare the compiled accumulation kernels with the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat R]``

Shapes follow the presets: batches of 128 frames on 1024-sample lines for the
per-sample kernels and 256 x 256 maps for the outer-product kernel.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from ghostscatter import _accumulate_py as fallback

try:
    from ghostscatter import _accumulate as compiled
except ImportError:  # pure-Python install
    compiled = None


def cases(rng):
    a = rng.exponential(1.0, (128, 1024))
    b = rng.exponential(1.0, (128, 1024))
    w = rng.exponential(1.0, 128)
    oa = rng.exponential(1.0, (128, 256))
    ob = rng.exponential(1.0, (128, 256))
    return {
        "add_rows 128x1024": ("add_rows", (a,), (1024,)),
        "add_products 128x1024": ("add_products", (a, b), (1024,)),
        "add_scaled 128x1024": ("add_scaled", (a, w), (1024,)),
        "add_outer 128x256x256": ("add_outer", (oa, ob), (256, 256)),
    }


def bench(mod, name, args, shape, repeat):
    fn = getattr(mod, name)

    def once():
        fn(*args, np.zeros(shape), np.zeros(shape))

    return min(timeit.repeat(once, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'python ms':>12}{'compiled ms':>14}{'speed-up':>10}")
    for label, (name, a, shape) in cases(rng).items():
        tp = bench(fallback, name, a, shape, args.repeat)
        if compiled is None:
            print(f"{label:<24}{tp * 1e3:>12.2f}{'n/a':>14}{'':>10}")
            continue
        tc = bench(compiled, name, a, shape, args.repeat)
        print(f"{label:<24}{tp * 1e3:>12.2f}{tc * 1e3:>14.2f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
