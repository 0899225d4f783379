"""Stepper vs Picard agreement under joint refinement; the ratio column should approach 4."""

import argparse

from bzmild import grid as G
from bzmild.grid import GridSpec
from bzmild.model import preset_params
from bzmild.stepper import refinement_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=1.0)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--points", type=int, default=64)
    ap.add_argument("--seed", type=int, default=4)
    args = ap.parse_args()

    p = preset_params(args.h)
    g = GridSpec(1, 100.0, args.points)
    u = G.band_limited(g, 0.0, 1.0, args.seed)
    v = G.band_limited(g, 0.0, 1.0, args.seed + 1)
    prev = None
    print(f"{'samples':>8} {'substeps':>8} {'dt':>10} {'gap':>10} {'ratio':>6}")
    for c in refinement_study(u, v, p, levels=args.levels):
        ratio = f"{prev / c.gap:6.2f}" if prev else ""
        print(f"{c.picard_samples:8d} {c.picard_quad_substeps:8d} {c.stepper_dt:10.3e} {c.gap:10.3e} {ratio}")
        prev = c.gap


if __name__ == "__main__":
    main()
