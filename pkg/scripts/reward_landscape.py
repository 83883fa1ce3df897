"""Survey the blind three-state reward landscape across discounts and starts.

For each discount factor on a grid and each Dirac start distribution, count
and classify the interior critical points of the reward curve over the
policy interval, and classify both endpoints.  The survey documents how the
landscape deforms with the discount: at low discounts the curve has at most
one interior critical point per start, and no setting of this model
produces two interior maxima for the middle start.

Run from the repository root:

    python3 scripts/reward_landscape.py [--gammas 0.5,0.7,0.9,0.95,0.99]
"""

import argparse

import numpy as np

from pomdp_geometry import fixtures
from pomdp_geometry.critical import blind_critical_points


def survey(gammas):
    print(f"{'gamma':>7} {'start':>6} {'interior roots':>42} {'p=0':>17} {'p=1':>17}")
    counts = {}
    for gamma in gammas:
        per_start = []
        for i in range(3):
            mu = np.zeros(3)
            mu[i] = 1.0
            model = fixtures.blind_three_state_model(mu=mu, gamma=gamma)
            cs = blind_critical_points(model)
            roots_txt = (
                ", ".join(f"{p:.6f} ({kind})" for p, kind in cs.interior_roots)
                or "-"
            )
            print(
                f"{gamma:>7.4f} {'s' + str(i + 1):>6} {roots_txt:>42} "
                f"{cs.boundary[0.0]:>17} {cs.boundary[1.0]:>17}"
            )
            per_start.append(cs.n_interior)
        counts[gamma] = tuple(per_start)
    print("\ninterior-root counts (s1, s2, s3) by gamma:")
    for gamma, triple in counts.items():
        print(f"  gamma={gamma:g}: {triple}")
    return counts


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--gammas",
        default="0.5,0.7,0.9,0.95,0.99",
        help="comma-separated discount factors",
    )
    args = parser.parse_args()
    gammas = [float(x) for x in args.gammas.split(",")]
    survey(gammas)


if __name__ == "__main__":
    main()
