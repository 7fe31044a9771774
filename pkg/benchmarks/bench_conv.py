"""Compare the compiled circular-convolution kernels against the numpy
im2col fallback on reaction-diffusion-sized fields.

Usage: python benchmarks/bench_conv.py [--batch 32] [--channels 8]
"""
import argparse
import time

import numpy as np

from hybridpd import kernels


def time_fn(fn, repeat=20):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--channels", type=int, default=8)
    parser.add_argument("--grid", type=int, default=32)
    args = parser.parse_args()

    try:
        backends = {"python": kernels.get_conv_backend("python"),
                    "c": kernels.get_conv_backend("c")}
    except ImportError:
        print("compiled kernels not built; run `python setup.py build_ext --inplace`")
        return 1

    rng = np.random.default_rng(0)
    rows = []
    for dtype in (np.float64, np.float32):
        x = np.ascontiguousarray(
            rng.normal(size=(args.batch, args.channels, args.grid, args.grid))
            .astype(dtype))
        w = np.ascontiguousarray(
            (rng.normal(size=(args.channels, args.channels, 3, 3)) * 0.1)
            .astype(dtype))
        b = np.zeros(args.channels, dtype=dtype)
        g = np.ascontiguousarray(rng.normal(size=x.shape).astype(dtype))
        ref_f = backends["python"].conv_circ_fwd(x, w, b)
        ref_b = backends["python"].conv_circ_bwd(x, w, g)
        got_f = backends["c"].conv_circ_fwd(x, w, b)
        got_b = backends["c"].conv_circ_bwd(x, w, g)
        tol = 1e-4 if dtype == np.float32 else 1e-9
        assert np.allclose(ref_f, got_f, rtol=1e-3, atol=tol)
        for u, v in zip(ref_b, got_b):
            assert np.allclose(u, v, rtol=1e-3, atol=tol)
        for name, impl in backends.items():
            t_f = time_fn(lambda: impl.conv_circ_fwd(x, w, b))
            t_b = time_fn(lambda: impl.conv_circ_bwd(x, w, g))
            rows.append((np.dtype(dtype).name, name, t_f, t_b))

    print(f"{'dtype':<9} {'backend':<8} {'forward':>10} {'backward':>10}")
    for dtype_name, name, t_f, t_b in rows:
        print(f"{dtype_name:<9} {name:<8} {t_f * 1e3:>8.2f}ms {t_b * 1e3:>8.2f}ms")
    for dtype_name in ("float64", "float32"):
        sub = {r[1]: r for r in rows if r[0] == dtype_name}
        print(f"{dtype_name} speedup: fwd {sub['python'][2] / sub['c'][2]:.1f}x, "
              f"bwd {sub['python'][3] / sub['c'][3]:.1f}x")
    print(f"(batch {args.batch}, {args.channels} channels, {args.grid}x{args.grid} "
          f"grid, circular 3x3; outputs agree within accumulation roundoff)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
