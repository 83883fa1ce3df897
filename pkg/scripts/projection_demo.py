"""Emit a 3-d projection of the feasible frequency set for plotting.

Samples random observation policies, maps them to state-action
frequencies, and projects everything to three coordinates through a random
orthonormal basis, together with the images of all 1-dimensional faces of
both the observation-policy polytope and the state-policy polytope.  The
CSV on stdout has columns tag,index,t,x,y,z and can be fed straight into
any plotting tool; the pomdp_edge curves bend while the mdp_edge curves
trace the boundary of the enclosing polytope.

Run from the repository root:

    python3 scripts/projection_demo.py models/three_state.json > projection.csv
"""

import argparse
import sys

from pomdp_geometry.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("model", help="model file (JSON or graph format)")
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--points", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    return cli_main(
        [
            "project",
            args.model,
            "--samples",
            str(args.samples),
            "--points",
            str(args.points),
            "--seed",
            str(args.seed),
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
