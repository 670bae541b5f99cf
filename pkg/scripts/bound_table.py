"""Runtime-bound arithmetic along mu = ceil(3 ln n), lambda = 13 e mu / (1 - c).

Prints the G3 population-size requirement and bound / (n lambda) per size.
"""

import argparse
import math

from umdakit.levels import LevelParams, expected_time_bound, g3_min_lambda


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--c", type=float, default=0.5)
    parser.add_argument("--sizes", default="100,1000,10000")
    args = parser.parse_args()
    print(f"{'n':>7} {'mu':>4} {'lambda':>9} {'g3 lambda':>10} {'bound':>12} {'bound/(n lam)':>14}")
    for n in (int(s) for s in args.sizes.split(",")):
        mu = math.ceil(3 * math.log(n))
        lam = 13 * math.e * mu / (1 - args.c)
        lp = LevelParams.for_umda(n, mu, lam, args.c)
        bound = expected_time_bound(lp.z, lp.delta, lam)
        g3 = g3_min_lambda(lp.gamma0, lp.delta, lp.m, lp.z_star)
        print(f"{n:>7} {mu:>4} {lam:>9.1f} {g3:>10.1f} {bound:>12.4g} {bound / (n * lam):>14.2f}")


if __name__ == "__main__":
    main()
