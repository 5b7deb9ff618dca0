"""Follow the non-even solution pair down in lambda and bracket where it leaves the even branch.

    python3 scripts/noneven_branch.py --nonlinearity exp --points 17
"""
import argparse
import sys

import numpy as np

from lbl.diagram import default_alpha_grid, export
from lbl.korman import cached_generator, lambda_of_alpha
from lbl.problem import exponential_spec, power_spec
from lbl.shooting import trace_noneven_branch
from lbl.spectra import scan_branch


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--l", type=float, default=1.0)
    ap.add_argument("--nonlinearity", choices=("exp", "power"), default="exp")
    ap.add_argument("--p", type=float, default=7.0)
    ap.add_argument("--top", type=float, default=0.9,
                    help="largest lambda as a fraction of lambda(alpha_3)")
    ap.add_argument("--bottom", type=float, default=0.01)
    ap.add_argument("--points", type=int, default=17)
    args = ap.parse_args(argv)

    spec = (power_spec(args.p, args.l) if args.nonlinearity == "power"
            else exponential_spec(args.l))
    gen = cached_generator(spec)
    scan = scan_branch(spec, gen, default_alpha_grid(spec))
    if not scan.found:
        sys.exit(f"no second-eigenvalue crossing: {scan.note}")
    lam3 = lambda_of_alpha(spec, gen, scan.alpha_3)
    grid = lam3 * np.geomspace(args.top, args.bottom, args.points)
    branch = trace_noneven_branch(spec, gen, scan, grid)
    export(branch, "json", sys.stdout)
    for lam, (a, b) in zip(branch.lambda_grid, branch.solutions):
        print(f"lambda={lam:.6g} beta=({a.beta:.8g}, {b.beta:.8g}) sup={a.sup_norm:.6g} "
              f"asymmetry={a.asymmetry:.3g}", file=sys.stderr)
    lo, hi = branch.alpha_2_bracket
    print(f"alpha_1={scan.alpha_1:.10g} alpha_3={scan.alpha_3:.10g} "
          f"alpha_2 in [{lo:.10g}, {hi:.10g}]", file=sys.stderr)


if __name__ == "__main__":
    main()
