"""Covering sweep on the DSBS(0.1) -> BSC(0.2) chain.

Prints, per blocklength, the codebook size, the codebook-averaged miss
probability and distortion excess next to their finite-n bounds.

    python3 scripts/covering_sweep.py --n 4 8 12 16 --gamma 0.5 --trials 20 --seed 2024
"""
import argparse

from covlab.covering import AcceptanceSet, CoveringConfig, DistortionMeasure, monte_carlo_covering
from covlab.prob import FiniteDistribution, bsc, compose_markov, dsbs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[4, 8, 12, 16])
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--level", type=float, default=0.35, help="Hamming threshold defining A")
    ap.add_argument("--p", type=float, default=0.1, help="DSBS crossover")
    ap.add_argument("--q", type=float, default=0.2, help="BSC test-channel crossover")
    args = ap.parse_args()

    triple = compose_markov(FiniteDistribution(dsbs(args.p).weights.T), bsc(args.q))
    ham = DistortionMeasure.hamming(2)
    acc = AcceptanceSet.distortion_threshold(ham, args.level)
    print(f"{'n':>3} {'M_n':>8} {'delta_n':>9} {'miss':>9} {'+-':>8} {'bound':>8} "
          f"{'excess':>9} {'bound':>8} {'fallback':>8} {'distinct':>8} {'method':>9}")
    for n in args.n:
        cfg = CoveringConfig(gamma=args.gamma, blocklength=n, trials=args.trials, seed=args.seed)
        r = monte_carlo_covering(triple, acc, ham, cfg)
        print(f"{n:>3} {r.m_used:>8} {r.delta_n:>9.6f} {r.miss_prob:>9.6f} {r.miss_prob_stderr:>8.6f} "
              f"{r.miss_bound:>8.4f} {r.distortion_excess:>+9.6f} {r.excess_bound:>8.4f} "
              f"{r.fallback_rate:>8.4f} {r.max_distinct:>8} {r.method:>9}")


if __name__ == "__main__":
    main()
