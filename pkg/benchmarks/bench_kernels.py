"""Time every hot kernel on the compiled and pure-Python backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Each case runs on identical inputs for both backends; the reported time is
the minimum over repeats, and results are checked for equality first.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from shadownbv import kernels

FREE, OCC, UNK = kernels.FREE, kernels.OCCUPIED, kernels.UNKNOWN


def _grid2d(rng, n, occ=0.15):
    return rng.choice([FREE, OCC, UNK], size=(n, n), p=[0.85 - occ, occ, 0.15]).astype(np.uint8)


def _grid3d(rng, shape, occ=0.08):
    return rng.choice([FREE, OCC, UNK], size=shape, p=[0.62 - occ, occ, 0.38]).astype(np.uint8)


def cases(quick: bool):
    rng = np.random.default_rng(7)
    n2 = 32 if quick else 64
    g2 = _grid2d(rng, n2)
    c = n2 // 2
    g2[c, c] = FREE
    g3 = _grid3d(rng, (60, 60, 12))
    o = (0.0, 0.0, 0.0)
    r = 0.2
    pos = rng.uniform([0.5, 0.5, 0.8], [11.5, 11.5, 1.6], size=(20, 3))
    lo = np.array([0.0, 0.0, 0.8])
    sc = np.array([12.0, 12.0, 0.8])
    half = np.array([0.3, 0.3, 0.25]) / r
    u = rng.random(3)
    free3 = g3.copy()
    free3[free3 == OCC] = FREE
    origin = np.array([30.5, 30.5, 6.5])
    dirs = rng.normal(size=(360, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    ends = np.ascontiguousarray(origin + dirs * 25.0)
    is_hit = (rng.random(360) < 0.5).astype(np.uint8)
    a, b = (5.0, 6.0, 1.2), (6.2, 6.9, 1.3)
    d = np.subtract(b, a)
    L = float(np.linalg.norm(d))
    ux, uy = d[0] / np.hypot(d[0], d[1]), d[1] / np.hypot(d[0], d[1])

    def vis2():
        return np.zeros(g2.shape, np.uint8)

    yield "rsc_fill", lambda k: k.rsc_fill(g2, c, c, vis2())
    yield "raycast_fill (8 rays/cell of rim)", lambda k: k.raycast_fill(g2, c, c, int(8 * 2 * np.pi * c), float(c), vis2())
    if quick:
        yield "los_fill (oracle)", lambda k: k.los_fill(g2, c, c, vis2())
    yield "edge_gain_cells (I_range 5 m)", lambda k: k.edge_gain_cells(g3, *o, r, *a, *b, L, ux, uy, 5.0, 2.0)
    yield "raycast_gain_cells (d_max 1.5 m)", lambda k: k.raycast_gain_cells(g3, *o, r, 6.0, 6.0, 1.2, 1.5, 0)
    yield "segment_clear", lambda k: k.segment_clear(free3, [25.0, 25.0, 6.0], [32.0, 29.0, 6.5], [1.5, 1.5, 1.25], 16)
    yield "extend", lambda k: k.extend(free3, pos, 20, u, lo, sc, 1.5, np.zeros(3), r, half)
    yield "integrate_rays (360 rays)", lambda k: k.integrate_rays(g3.copy(), origin, ends, is_hit)


def _same(x, y):
    if isinstance(x, tuple):
        return len(x) == len(y) and all(_same(a, b) for a, b in zip(x, y))
    return x == y or (x is None and y is None)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)
    try:
        cy = kernels.backend("cython")
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    py = kernels.backend("python")
    print(f"{'kernel':<36} {'cython':>11} {'python':>11} {'speedup':>8}")
    ok = True
    for name, fn in cases(args.quick):
        if not _same(fn(cy), fn(py)):
            print(f"{name}: backends disagree", file=sys.stderr)
            ok = False
        t_c = min(timeit.repeat(lambda: fn(cy), number=10, repeat=args.repeat)) / 10
        t_p = min(timeit.repeat(lambda: fn(py), number=1, repeat=max(2, args.repeat // 2)))
        print(f"{name:<36} {t_c * 1e6:>9.1f}us {t_p * 1e3:>9.2f}ms {t_p / t_c:>7.0f}x")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
