"""Trap-time chain T1 <= ... <= T# for a grid of seeds c* and initial bounds m."""

import argparse
import sys

from bzmild.comparison import trap_chain
from bzmild.io import write_csv
from bzmild.model import preset_params

COLUMNS = ["c_star", "m", "q1", "q2", "q3", "kappa_star", "T1", "T2", "T3", "T4", "T_sharp"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=1.0)
    ap.add_argument("--c-star", type=float, nargs="+", default=[1e-5, 1e-4])
    ap.add_argument("--m", type=float, nargs="+", default=[1.0, 2.0])
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args()

    p = preset_params(args.h)
    rows = []
    for c in args.c_star:
        for m in args.m:
            row = trap_chain(c, m, p).as_row()
            rows.append([row[k] for k in COLUMNS])
    print("  ".join(f"{k:>11}" for k in COLUMNS))
    for r in rows:
        print("  ".join(f"{x:11.5g}" for x in r))
    if args.csv:
        write_csv(args.csv, COLUMNS, rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
