"""Compare the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 256] [--repeat 20]

Both backends are imported directly, so the ``EMHD2D_PURE_PYTHON`` switch
does not matter here. Results agree to rounding; timings are printed as
best-of-``repeat`` in milliseconds.
"""

import argparse
import timeit

import numpy as np

from emhd2d import _pykernels
from emhd2d.grid import make_grid

try:
    from emhd2d import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(n, rng):
    g = make_grid(n, n)
    xi1 = np.broadcast_to(g.KX, g.shape).copy()
    k2 = g.K2.copy()
    psi = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    b = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    # decay quadrature node set of comparable size
    m = n * n
    q1 = rng.uniform(-6, 6, m)
    q2 = rng.uniform(0, 6, m)
    qk2 = q1**2 + q2**2
    w = rng.uniform(0, 1e-3, m)
    b0 = np.abs(q1) ** 0.45 * np.exp(-qk2)
    return {
        "linear_coefficients": lambda mod: mod.linear_coefficients(xi1, k2, 0.0, 1.0, 0.3),
        "propagate": lambda mod: mod.propagate(xi1, k2, 0.0, 1.0, 0.3, psi, b),
        "decay_sums": lambda mod: mod.decay_sums(q1, qk2, w, np.zeros(m), b0, 100.0, 1, 0.0, 1.0),
    }


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=256, help="grid size n (n x n modes)")
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    print(f"grid {args.n}x{args.n}, best of {args.repeat}")
    print(f"{'kernel':<22}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(args.n, rng).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<22}{t_py:>12.3f}{'n/a':>12}{'':>10}{'':>12}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        diff = max_diff(fn(_pykernels), fn(_ckernels))
        print(f"{name:<22}{t_py:>12.3f}{t_c:>12.3f}{t_py / t_c:>9.2f}x{diff:>12.2e}")


if __name__ == "__main__":
    main()
