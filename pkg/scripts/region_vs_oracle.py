"""Lattice frontier of the two-terminal region against the hill-climbing oracle.

    python3 scripts/region_vs_oracle.py --p 0.1 --d 0.02 0.05 0.1 --points 33 --fine 64
"""
import argparse
import time

from covlab.multiterminal import (brute_force_frontier_oracle, frontier_gap, hamming_table,
                                  pair_distortion, region_sweep)
from covlab.prob import dsbs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--d", type=float, nargs="+", default=[0.02, 0.05, 0.1])
    ap.add_argument("--aux", type=int, nargs=2, default=[2, 2])
    ap.add_argument("--points", type=int, default=33)
    ap.add_argument("--fine", type=int, default=64)
    ap.add_argument("--levels", type=int, default=15)
    ap.add_argument("--restarts", type=int, default=6)
    ap.add_argument("--show-corners", action="store_true")
    args = ap.parse_args()

    src = dsbs(args.p)
    t = pair_distortion(hamming_table(2), hamming_table(2))
    for d in args.d:
        t0 = time.perf_counter()
        sw = region_sweep(src, t, d, tuple(args.aux), args.points)
        t1 = time.perf_counter()
        orc = brute_force_frontier_oracle(src, t, d, tuple(args.aux), args.fine,
                                          restarts=args.restarts, levels=args.levels)
        t2 = time.perf_counter()
        print(f"D={d}: sweep min sum {sw.min_sum_rate:.5f} ({t1 - t0:.1f}s, {sw.evaluated} pairs), "
              f"oracle min sum {orc.min_sum_rate:.5f} ({t2 - t1:.1f}s), gap {frontier_gap(sw, orc):.5f}, "
              f"{len(sw.corners())} corners")
        for r1, r2 in (sw.corners() if args.show_corners else ()):
            print(f"    corner ({r1:.5f}, {r2:.5f})")


if __name__ == "__main__":
    main()
