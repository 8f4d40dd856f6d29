"""Jump-point offset at the fold against eps2 and its log-log exponent.

Example
-------
    python scripts/fold_exponent.py --points 10
"""

import argparse
import sys

import numpy as np

from cusplab import fold_exponent_fit


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lo", type=float, default=1e-5, help="smallest eps2")
    p.add_argument("--hi", type=float, default=1e-3, help="largest eps2")
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--A0", type=float, default=1.0)
    args = p.parse_args(argv)

    eps = np.geomspace(args.lo, args.hi, args.points)
    fit = fold_exponent_fit(list(eps), A0=args.A0)
    for e, off in zip(fit.eps, fit.offsets):
        print(f"  eps2={e:.3e}  offset={off:.6e}")
    print(f"fitted exponent {fit.slope:.4f} (2/3 = {2 / 3:.4f})")
    print(f"jump point distance from the fold at the smallest eps2: {fit.jump_distance(0):.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
