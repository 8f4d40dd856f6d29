"""Entry-chart exit coordinate b1 across the inner, matching and outer layers.

Example
-------
    python scripts/layer_scaling.py --eps 1e-3
"""

import argparse
import sys

from cusplab import layer_study, principal_system


def parse_floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--eps", type=parse_floats, default=[1e-4, 1e-3, 1e-2])
    p.add_argument("--mu-list", type=parse_floats, default=[-2.0, -1.0, 0.0, 1.0, 2.0])
    p.add_argument("--L", type=float, default=0.5)
    p.add_argument("--M", type=float, default=1.0)
    args = p.parse_args(argv)

    system = principal_system()
    for e in args.eps:
        print(f"eps = {e:.1e}")
        for row in layer_study(system, e, args.mu_list, args.L, args.M, run_transition=False):
            print(f"  mu={row.mu:+.2f}  b0={row.b0:+.4e}  layer={str(row.label):<11}"
                  f"  b1_exit={row.b1_exit:+.4e}  escaped={row.escaped}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
