"""Time the compiled and pure-Python ARMA whitening kernels.

Usage: python benchmarks/bench_kalman.py [--n 1500] [--cols 90] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from gridgdp import _kalman_py, arma

try:
    from gridgdp import _kalman_ext
except ImportError:
    _kalman_ext = None

ORDERS = [(1, 0), (1, 1), (3, 0), (3, 2), (5, 2)]


def case(p, q, n, cols, rng):
    phi = np.array([0.5, -0.2, 0.1, 0.05, -0.05][:p])
    theta = np.array([0.3, 0.1][:q])
    _, P0 = arma.state_space(phi, theta)
    Y = rng.standard_normal((n, cols))
    return phi, theta, P0, Y


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1500)
    ap.add_argument("--cols", type=int, default=90)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"n={args.n} cols={args.cols}  (best of {args.repeat}, milliseconds)")
    print(f"{'order':>8} {'python':>10} {'cython':>10} {'speedup':>8} {'max diff':>10}")
    for p, q in ORDERS:
        phi, theta, P0, Y = case(p, q, args.n, args.cols, rng)
        t_py = min(timeit.repeat(lambda: _kalman_py.arma_whiten(phi, theta, P0, Y), number=1, repeat=args.repeat))
        if _kalman_ext is None:
            print(f"{str((p, q)):>8} {1e3 * t_py:10.2f} {'n/a':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: _kalman_ext.arma_whiten(phi, theta, P0, Y), number=1, repeat=args.repeat))
        a = _kalman_py.arma_whiten(phi, theta, P0, Y)[0]
        b = _kalman_ext.arma_whiten(phi, theta, P0, Y)[0]
        print(f"{str((p, q)):>8} {1e3 * t_py:10.2f} {1e3 * t_cy:10.2f} {t_py / t_cy:8.1f} {np.abs(a - b).max():10.2e}")


if __name__ == "__main__":
    main()
