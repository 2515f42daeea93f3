"""Hull-walk throughput: numba kernel against the numpy lockstep fallback.

    python3 benchmarks/bench_walk.py [--L 64] [--walks 4000] [--repeat 3]

Both backends consume the same random draws, so the script also checks
that they return identical loops.  To run the whole package on the numpy
path instead, set CLASSCNET_NUMBA=0 in the environment.
"""
import argparse
import time

import numpy as np

from classcnet import _accel
from classcnet.lattice import hull_loop_statistics


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--walks", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    rows = []
    results = {}
    for name, flag in (("numpy", False), ("numba", True)):
        if flag and not _accel.HAVE_NUMBA:
            print("numba not installed; skipping")
            continue
        run = lambda: hull_loop_statistics(args.L, args.p, args.walks, args.seed, use_numba=flag)
        if flag:
            run()  # compile (or load the on-disk cache) outside the timing
        sec, stats = timed(run, args.repeat)
        results[name] = stats
        steps = int(stats.lengths.sum())
        rows.append((name, sec, steps / sec))

    print(f"L={args.L} p={args.p} walks={args.walks}  (best of {args.repeat})")
    print(f"{'backend':8s} {'seconds':>9s} {'steps/s':>12s}")
    for name, sec, rate in rows:
        print(f"{name:8s} {sec:9.3f} {rate:12.3e}")
    if len(rows) == 2:
        print(f"speedup  {rows[0][1] / rows[1][1]:9.1f}x")
        same = np.array_equal(results["numpy"].lengths, results["numba"].lengths)
        print(f"identical loops: {same}")


if __name__ == "__main__":
    main()
