"""Compiled vs pure-Python kernels on k-NN two-moons graphs.

    python3 benchmarks/bench_kernels.py [--sizes 1000 4000 16000] [--repeat 5]

Prints best-of-``repeat`` wall times in milliseconds for the LGC fixed point
and the sparse row products used by the curriculum learner, plus the
max-abs difference between the two backends.
"""
import argparse
import time

import numpy as np

from graphssl import _kernels_py, build_knn_graph, gen_two_moons, normalized_smoother

try:
    from graphssl import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 4000, 16000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--alpha", type=float, default=0.99)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled kernels not built; only the python backend is timed")

    print(f"{'kernel':<12}{'n':>7}{'python ms':>12}{'cython ms':>12}{'speedup':>9}{'max diff':>11}")
    for n in args.sizes:
        data = gen_two_moons(n, 0.05, 1, seed=0)
        S = normalized_smoother(build_knn_graph(data, 10))
        Y = data.seeds()
        rows = np.random.default_rng(0).choice(n, size=n // 10, replace=False)
        F = np.random.default_rng(1).random((n, Y.shape[1]))
        cases = {
            "fixed_point": lambda k: k.fixed_point(S, Y, args.alpha, 1e-8, 100000)[0],
            "row_products": lambda k: k.row_products(S, rows, F),
        }
        for name, call in cases.items():
            tp, out_p = best_of(lambda: call(_kernels_py), args.repeat)
            if compiled is None:
                print(f"{name:<12}{n:>7}{tp:>12.2f}{'-':>12}{'-':>9}{'-':>11}")
                continue
            tc, out_c = best_of(lambda: call(compiled), args.repeat)
            diff = np.abs(out_p - out_c).max()
            print(f"{name:<12}{n:>7}{tp:>12.2f}{tc:>12.2f}{tp / tc:>9.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
