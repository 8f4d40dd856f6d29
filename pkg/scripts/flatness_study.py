"""Effect of flat perturbations on the transition rate.

Compares the principal system with a bump that is flat in eps and with a
bump that is flat only at the origin of phase space.

Example
-------
    python scripts/flatness_study.py --amplitude 1.0
"""

import argparse
import sys

from cusplab import flatness_robustness, stock_flat_system


def parse_floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=0.06, help="width of the eps-flat bump")
    p.add_argument("--eps-list", type=parse_floats, default=[2e-2, 1e-2, 5e-3, 2.5e-3])
    args = p.parse_args(argv)

    for kind in ("eps", "origin"):
        system = stock_flat_system(kind, args.amplitude, args.kappa)
        rep = flatness_robustness(system, args.b, args.eps_list)
        print(f"{kind}-flat bump (amplitude {args.amplitude})")
        for e, f, pr, d in zip(rep.eps, rep.rate_flat, rep.rate_principal, rep.differences):
            print(f"  eps={e:.2e}  flat={f:.10f}  principal={pr:.10f}  diff={d:.3e}")
        print("  successive ratios:", ", ".join(f"{r:.3g}" for r in rep.ratios))
        print(f"  shrinks by more than 4 each halving: {rep.shrinks(4.0)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
