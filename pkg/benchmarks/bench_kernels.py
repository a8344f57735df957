"""Time each accelerated kernel with numba on and off.

    python benchmarks/bench_kernels.py [--repeat 5] [--res 64]

Prints one line per kernel: best-of-N wall time for both paths and the
speed-up.  The first numba call (compilation) is excluded.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from convfno import kernels
from convfno._accel import HAVE_NUMBA, use_numba


def cases(res: int):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((16, 32, res, res))
    gamma, beta = rng.standard_normal(32), rng.standard_normal(32)
    gout = rng.standard_normal(x.shape)
    _, mean, inv = kernels.group_norm_forward(x, gamma, beta, 4, 1e-5)
    u = np.clip(rng.standard_normal((8, res, res)), -1, 1)
    a = np.exp(rng.standard_normal((res, res)))
    ax, ay = a.copy(), a.copy()
    out = np.empty_like(a)
    return {
        "gelu": lambda: kernels.gelu(x),
        "gelu_with_slope": lambda: kernels.gelu_with_slope(x),
        "group_norm_forward": lambda: kernels.group_norm_forward(x, gamma, beta, 4, 1e-5),
        "group_norm_backward": lambda: kernels.group_norm_backward(x, gout, gamma, mean, inv, 4),
        "allen_cahn_steps (50 steps)": lambda: kernels.allen_cahn_steps(u.copy(), 50, 1e-4, 0.0025, 1 / res, -1.0),
        "allen_cahn_steps + energy": lambda: kernels.allen_cahn_steps(u.copy(), 50, 1e-4, 0.0025, 1 / res, 0.0),
        "darcy_apply": lambda: kernels.darcy_apply(a, ax, ay, float(res * res), out),
    }


def best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--res", type=int, default=64)
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path is available")
    print(f"{'kernel':32s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speed-up':>9s}")
    for name, fn in cases(args.res).items():
        with use_numba(False):
            t_np = best(fn, args.repeat)
        if HAVE_NUMBA:
            with use_numba(True):
                fn()  # compile
                t_nb = best(fn, args.repeat)
            print(f"{name:32s} {t_np * 1e3:11.3f} {t_nb * 1e3:11.3f} {t_np / t_nb:8.2f}x")
        else:
            print(f"{name:32s} {t_np * 1e3:11.3f} {'-':>11s}")


if __name__ == "__main__":
    main()
