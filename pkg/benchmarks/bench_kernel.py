"""Compiled kernel against the pure-Python fallback.

Runs the same flows through both backends, checks that the results agree and
prints wall times and the speed-up.

    python3 benchmarks/bench_kernel.py [--repeat 3] [--points 200]
"""

import argparse
import math
import time

import numpy as np

from weightedshift import kernel
from weightedshift.classify import uniform_sampler
from weightedshift.field import builtin
from weightedshift.flow import FlowOptions, advance_flow

CASES = [
    ("rotation", {}, 2 * math.pi),
    ("vfp_fourier", {"N": 2}, 3.0),
    ("lorentz", {}, 10.0),
    ("nordstrom", {}, 2.0),
    ("slab_constant", {"c": 0.5, "d": 0.3}, 1.0),
]


def run(prob, pts, t, backend):
    opts = FlowOptions(backend=backend)
    t0 = time.perf_counter()
    out = [advance_flow(prob, x, t, opts) for x in pts]
    return time.perf_counter() - t0, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--points", type=int, default=200)
    args = ap.parse_args(argv)
    if kernel.BACKEND != "cython":
        print("compiled kernel not available; nothing to compare")
        return 1
    print(f"{'problem':<15}{'steps':>9}{'python s':>11}{'cython s':>11}{'speed-up':>10}{'max diff':>11}")
    for name, params, t in CASES:
        prob = builtin(name, params)
        pts = uniform_sampler(prob)(np.random.default_rng(0), args.points)
        py = min(run(prob, pts, t, "python")[0] for _ in range(args.repeat))
        cy, res_c = min((run(prob, pts, t, "cython") for _ in range(args.repeat)), key=lambda r: r[0])
        _, res_p = run(prob, pts, t, "python")
        diff = max(float(np.max(np.abs(a.endpoint - b.endpoint))) for a, b in zip(res_p, res_c))
        steps = sum(r.steps for r in res_c)
        print(f"{name:<15}{steps:>9}{py:>11.3f}{cy:>11.3f}{py / cy:>9.1f}x{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
