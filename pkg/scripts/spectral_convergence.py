"""Quantile estimates of the spectral sup/inf information rates of DSBS(p)
as the blocklength grows.

    python3 scripts/spectral_convergence.py --n 50 100 200 500 1000 --samples 2000
"""
import argparse
import math

import numpy as np

from covlab.prob import dsbs, rng_stream
from covlab.spectrum import density_table, empirical_spectral_rate, mutual_information, sample_information_density


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--n", type=int, nargs="+", default=[50, 100, 200, 500, 1000, 2000])
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    joint = dsbs(args.p)
    target = mutual_information(joint)
    dens = density_table(joint)
    sd = math.sqrt(float(np.sum(joint.weights * (dens - target) ** 2)))
    print(f"I = {target:.5f} nats, per-letter density sd = {sd:.4f}")
    print(f"{'n':>6} {'inf':>8} {'sup':>8} {'max dev':>8} {'normal approx':>13}")
    for n in args.n:
        z = sample_information_density(joint, n, args.samples, rng_stream(args.seed, n))
        lo = empirical_spectral_rate(z, args.eps, "inf").rate
        hi = empirical_spectral_rate(z, args.eps, "sup").rate
        print(f"{n:>6} {lo:>8.4f} {hi:>8.4f} {max(hi - target, target - lo):>8.4f} "
              f"{1.6449 * sd / math.sqrt(n):>13.4f}")


if __name__ == "__main__":
    main()
