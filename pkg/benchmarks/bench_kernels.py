"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--reps 3] [--threads 1]

Prints the best wall time of each backend per case and checks that both
backends return identical arrays.
"""
import argparse
import time

import numpy as np

from mdclt import _kernels_py

try:
    from mdclt import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_time(fn, reps):
    best, out = float("inf"), None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    gen = np.random.default_rng(0)
    yield "replicate_uniforms R=1e4 k=4096", "replicate_uniforms", (12345, 0, 10_000, 4096)
    yield "replicate_uniforms R=1e5 k=60", "replicate_uniforms", (12345, 0, 100_000, 60)
    for p in (1, 3, 20):
        x = gen.standard_normal((100_000, p))
        c = gen.standard_normal((2000, p))
        yield f"rect_counts R=1e5 corners=2000 p={p}", "rect_counts", (x, c)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; only the fallback can run")
    print(f"{'case':40s} {'cython [s]':>11s} {'python [s]':>11s} {'speedup':>8s}  same")
    for name, fn, fargs in cases():
        tp, outp = best_time(lambda: getattr(_kernels_py, fn)(*fargs, threads=args.threads),
                             args.reps)
        if _kernels is None:
            print(f"{name:40s} {'-':>11s} {tp:11.3f} {'-':>8s}  -")
            continue
        tc, outc = best_time(lambda: getattr(_kernels, fn)(*fargs, threads=args.threads),
                             args.reps)
        same = np.array_equal(np.asarray(outc), np.asarray(outp))
        print(f"{name:40s} {tc:11.3f} {tp:11.3f} {tp / tc:7.1f}x  {same}")


if __name__ == "__main__":
    main()
