"""Growth of a small perturbation of the zero state, uniform and localized."""

import argparse

from bzmild.grid import GridSpec
from bzmild.model import preset_params
from bzmild.monitor import instability_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=1.0)
    ap.add_argument("--amplitude", type=float, default=1e-6)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=64)
    args = ap.parse_args()

    p = preset_params(args.h)
    g = GridSpec(1, 20.0, args.points)
    for localized in (False, True):
        r = instability_probe(p, args.amplitude, args.T, g, localized=localized)
        gap = "" if r.ode_gap is None else f"  ODE gap={r.ode_gap:.1e}"
        print(f"{'localized' if localized else 'uniform':>9}: growth x{r.growth:.3g}  "
              f"min u={r.min_u_final:.2e}  support {r.spread_initial}->{r.spread_final}{gap}")


if __name__ == "__main__":
    main()
