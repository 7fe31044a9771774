"""Compare the compiled tree kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--trees 300] [--rows 300]
Prints a table of wall times and the speedup, and verifies both backends
produce identical outputs on the benchmark inputs.
"""
import argparse
import time

import numpy as np

from hybridpd import kernels, trees


def time_fn(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--trees", type=int, default=300)
    parser.add_argument("--rows", type=int, default=300)
    parser.add_argument("--features", type=int, default=10)
    parser.add_argument("--queries", type=int, default=300)
    args = parser.parse_args()

    try:
        backends = {name: kernels.get_backend(name) for name in ("python", "c")}
    except ImportError:
        print("compiled kernels not built; run `python setup.py build_ext --inplace`")
        return 1

    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.uniform(0, 1, size=(args.rows, args.features)))
    y = (10 * np.sin(np.pi * x[:, 0] * x[:, 1]) + 20 * (x[:, 2] - 0.5) ** 2
         + rng.normal(size=args.rows))
    idx = np.arange(args.rows, dtype=np.int64)
    big = np.ascontiguousarray(np.repeat(x, args.queries // 3 + 1, axis=0))

    gb = trees.fit_gb(x, y, args.trees, max_depth=2, seed=0)
    arrays = [t.arrays() for t in gb.trees]
    weights = [gb.shrinkage] * len(arrays)

    rows = []
    results = {}
    for name, impl in backends.items():
        t_split, out_split = time_fn(lambda: impl.best_split(x, y, idx, 2))
        t_pred, out_pred = time_fn(
            lambda: np.asarray(impl.predict_ensemble(arrays, big, weights, gb.init)))
        results[name] = (out_split, out_pred)
        rows.append((name, t_split, t_pred))

    a, b = results["python"], results["c"]
    assert a[0] == b[0], "best_split outputs differ between backends"
    assert np.array_equal(a[1], b[1]), "ensemble predictions differ between backends"

    print(f"selected backend at import: {kernels.BACKEND}")
    print(f"{'backend':<10} {'best_split':>12} {'ensemble_predict':>18}")
    for name, t_split, t_pred in rows:
        print(f"{name:<10} {t_split * 1e3:>10.2f}ms {t_pred * 1e3:>16.2f}ms")
    py = dict((r[0], r) for r in rows)["python"]
    cc = dict((r[0], r) for r in rows)["c"]
    print(f"{'speedup':<10} {py[1] / cc[1]:>11.1f}x {py[2] / cc[2]:>17.1f}x")
    print(f"(GB {args.trees} trees, {args.rows} rows, {args.features} features, "
          f"prediction batch {big.shape[0]} rows; outputs bit-identical)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
