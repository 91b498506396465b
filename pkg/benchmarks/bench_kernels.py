"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 48] [--repeat 5]
"""
import argparse
import time

import numpy as np

from nlslab import _kernels
from nlslab.grid import Grid3D


def _best(fn, repeat):
    fn()  # warm-up, includes jit compilation
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n):
    rng = np.random.default_rng(0)
    g = Grid3D(n, 8.0)
    w = np.exp(-g.radius ** 2).astype(complex).ravel()
    z1 = (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)).ravel()
    z2 = np.conj(z1)
    dr = 0.01
    r = np.arange(2000) * dr
    vals, ders = np.exp(-r * r), -2 * r * np.exp(-r * r)
    pts = np.ravel(g.radius)
    absv = np.exp(-g.radius ** 2)
    xs, ys, zs = (np.ravel(c) for c in g.coords)
    targets = np.stack([xs[::997], ys[::997], zs[::997]], axis=1)
    return {
        "shoot": lambda impl: impl.shoot(4.3373876, 1.0, 1e-3, 20.0),
        "hermite": lambda impl: impl.hermite(dr, vals, ders, pts),
        "potential": lambda impl: impl.potential(w, z1, z2),
        "nonlinearity": lambda impl: impl.nonlin(w, z1, z2),
        "kato_direct": lambda impl: impl.kato_direct(np.ravel(absv), xs, ys, zs, targets, g.h),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=48)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.NUMBA_IMPL is None:
        raise SystemExit("numba is not installed")
    print(f"{'kernel':<14}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, fn in cases(args.n).items():
        tn = _best(lambda: fn(_kernels.NUMPY_IMPL), args.repeat)
        tb = _best(lambda: fn(_kernels.NUMBA_IMPL), args.repeat)
        print(f"{name:<14}{tn:12.4f}{tb:12.4f}{tn / tb:10.1f}")


if __name__ == "__main__":
    main()
