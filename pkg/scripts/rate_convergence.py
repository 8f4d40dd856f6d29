"""Transition rate against eps for several b, compared with the SDI target.

Example
-------
    python scripts/rate_convergence.py --b-list 0,0.3,-0.3 --out runs/rates.csv
"""

import argparse
import csv
import sys

from cusplab import principal_system, sweep_eps


def parse_floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--b-list", type=parse_floats, default=[0.0, 0.3, -0.3])
    p.add_argument("--eps-list", type=parse_floats, default=[2e-2, 1e-2, 5e-3, 2e-3, 1e-3])
    p.add_argument("--out", help="optional CSV with one row per (b, eps)")
    args = p.parse_args(argv)

    system = principal_system()
    rows = []
    for b in args.b_list:
        rep = sweep_eps(system, b, args.eps_list)
        print(f"b = {b:+.3f}   target -I = {-rep.target_I:.10f}")
        for r in rep.row_dicts():
            print(f"  eps={r['eps']:.2e}  rate={r['rate_num']:.10f}  |rate + I|={r['deviation']:.3e}")
            rows.append(r)
        print(f"  slope of deviation vs eps*log(1/eps): {rep.slope_eps_log:.3f}   monotone: {rep.monotone()}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
