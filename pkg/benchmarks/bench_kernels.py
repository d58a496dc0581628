"""Compare the compiled and numpy kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--N 256] [--repeat 3]
"""

import argparse
import time

import numpy as np

from interlimit import _pykernels
from interlimit.fields import Grid
from interlimit.geometry import InterfaceCurve

try:
    from interlimit import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    grid = Grid(args.N)
    curve = InterfaceCurve.perturbed_circle(0.25, {3: 0.02, 5: 0.01})
    P = grid.points
    proj_args = (np.ascontiguousarray(P[:, 0]), np.ascontiguousarray(P[:, 1]), curve.k, curve.ax, curve.bx,
                 curve.ay, curve.by, curve.samples[:, 0].copy(), curve.samples[:, 1].copy())
    X, Y = grid.mesh
    c = np.ascontiguousarray(np.tanh((0.25 - np.hypot(X - 0.5, Y - 0.5)) / (0.04 * np.sqrt(2))))
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"grid {args.N}x{args.N}, {P.shape[0]} points, {curve.samples.shape[0]} curve samples")
    print(f"{'kernel':<22}{'backend':<10}{'seconds':>10}")
    ref = {}
    for name, mod in backends:
        tp, (s, d, status) = best_of(lambda: mod.project_points(*proj_args), args.repeat)
        tm, (length, area) = best_of(lambda: mod.contour_length_area(c, grid.h, 0.0), args.repeat)
        print(f"{'project_points':<22}{name:<10}{tp:>10.4f}")
        print(f"{'contour_length_area':<22}{name:<10}{tm:>10.4f}")
        if ref:
            print(f"  max |d| difference {np.max(np.abs(d - ref['d'])):.2e}, "
                  f"length difference {abs(length - ref['length']):.2e}")
        else:
            ref = {"d": d, "length": length}


if __name__ == "__main__":
    main()
