"""Random-data invariance run over the named regions, one summary line per region."""

import argparse

from bzmild.grid import GridSpec
from bzmild.model import preset_params
from bzmild.monitor import invariance_experiment, named_region


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=1.0)
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--points", type=int, default=128)
    ap.add_argument("--extent", type=float, default=100.0)
    ap.add_argument("--m", type=float, default=2.0, help="half-side of the [0, m]^2 box")
    ap.add_argument("--regions", nargs="+", default=["S", "box"])
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    p = preset_params(args.h)
    grid = GridSpec(1, args.extent, args.points)
    for name in args.regions:
        region = named_region(name, p, m=args.m)
        cap = max(1.0, args.m) if name == "box" else 1.0
        rep = invariance_experiment(p, region, args.samples, args.T, grid, seed=args.seed, tol=1e-8, cap=cap)
        print(f"{region.name:>10}  {'PASS' if rep.passed else 'FAIL'}  dt={rep.dt:.3e}  "
              f"worst overshoot={max(rep.worst):.2e}")


if __name__ == "__main__":
    main()
