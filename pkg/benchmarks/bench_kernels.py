"""Time the pointwise kernels under both backends.

    python benchmarks/bench_kernels.py [--points 512] [--repeat 20]

Prints one line per (kernel, alpha) with milliseconds per call for numpy and
numba and their ratio.  Both variants are imported directly, so the
INLS_DISABLE_NUMBA flag does not matter here.
"""
import argparse
import timeit

import numpy as np

from inls import kernels


def bench(fn, repeat):
    fn()  # compile / warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    shape = (args.points, args.points)
    u = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    w = np.abs(rng.normal(size=shape))

    print(f"grid {args.points}^2, best of {args.repeat}")
    print(f"{'kernel':<16}{'alpha':>7}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}")
    for alpha in (2.0, 3.0, 4.0 / 3.0):
        rows = {
            "nonlinear_phase": (lambda: kernels.nonlinear_phase_numpy(u.copy(), w, alpha, 1e-3),
                                lambda: kernels.nonlinear_phase_numba(u.copy(), w, alpha, 1e-3)),
            "weighted_power": (lambda: kernels.weighted_power_numpy(w, u, alpha + 2),
                               lambda: kernels.weighted_power_numba(w, u, alpha + 2)),
        }
        for name, (a, b) in rows.items():
            ta, tb = bench(a, args.repeat), bench(b, args.repeat)
            print(f"{name:<16}{alpha:>7.3g}{ta:>11.2f}{tb:>11.2f}{ta / tb:>9.2f}")


if __name__ == "__main__":
    main()
