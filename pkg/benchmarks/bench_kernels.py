"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--cells 4000] [--dim 2]

Each kernel is timed on identical random inputs with :mod:`timeit`; the
best of ``--repeat`` runs is reported with the speedup of the compiled
version. The outputs of the two backends are compared as a sanity check.
"""
import argparse
import timeit

import numpy as np

from godeconj import _fallback

try:
    from godeconj import _kernels
except ImportError:  # extension not built
    _kernels = None


def make_inputs(cells: int, dim: int, batch: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    Phi = np.eye(dim) + 0.01 * rng.normal(size=(cells, dim, dim))
    Phi_inv = np.linalg.inv(Phi)
    P = np.zeros((cells + 1, dim, dim))
    P[:] = np.diag([1.0] + [0.0] * (dim - 1))
    incr = rng.normal(size=(batch, cells, dim))
    start = rng.integers(0, cells + 1, batch)
    x0 = rng.normal(size=(batch, dim))
    D = [rng.normal(size=(cells, dim, dim)) for _ in range(3)]
    hs = np.full(cells, 1e-3)
    seg_ptr = np.linspace(0, cells, 5).astype(np.int64)
    return {
        "projected_scans": (Phi, Phi_inv, P, incr),
        "linear_scan": (Phi, Phi_inv, incr, start, x0),
        "rk4_products": (*D, hs, seg_ptr),
    }


def best_time(fn, args, repeat: int) -> float:
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def max_gap(a, b) -> float:
    if isinstance(a, tuple):
        return max(max_gap(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--cells", type=int, default=4000)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--batch", type=int, default=64)
    args = ap.parse_args(argv)

    inputs = make_inputs(args.cells, args.dim, args.batch)
    print(f"cells={args.cells} dim={args.dim} batch={args.batch} repeat={args.repeat}")
    if _kernels is None:
        print("compiled kernels are not built; timing the fallback only")
    print(f"{'kernel':<16} {'python [ms]':>12} {'compiled [ms]':>14} {'speedup':>8} {'max gap':>10}")
    for name, fargs in inputs.items():
        py = best_time(getattr(_fallback, name), fargs, args.repeat)
        if _kernels is None:
            print(f"{name:<16} {1e3 * py:>12.3f} {'-':>14} {'-':>8} {'-':>10}")
            continue
        cy = best_time(getattr(_kernels, name), fargs, args.repeat)
        gap = max_gap(getattr(_fallback, name)(*fargs), getattr(_kernels, name)(*fargs))
        print(f"{name:<16} {1e3 * py:>12.3f} {1e3 * cy:>14.3f} {py / cy:>7.1f}x {gap:>10.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
