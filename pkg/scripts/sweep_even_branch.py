"""Sweep the even branch and write lambda, sup-norm, eigenvalues and Morse index as CSV.

    python3 scripts/sweep_even_branch.py --nonlinearity power --p 7 --points 400 out.csv
"""
import argparse
import sys

import numpy as np

from lbl.diagram import export, trace_even_branch
from lbl.problem import exponential_spec, power_spec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("output", nargs="?", default="-", help="CSV path, '-' for stdout")
    ap.add_argument("--l", type=float, default=1.0)
    ap.add_argument("--nonlinearity", choices=("exp", "power"), default="exp")
    ap.add_argument("--p", type=float, default=7.0)
    ap.add_argument("--alpha-range", type=float, nargs=2, default=(1e-2, 30.0))
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    spec = (power_spec(args.p, args.l) if args.nonlinearity == "power"
            else exponential_spec(args.l))
    grid = np.geomspace(*args.alpha_range, args.points)
    table = trace_even_branch(spec, grid, threads=args.threads)
    export(table, "csv", sys.stdout if args.output == "-" else args.output)

    c = table.critical
    print(f"alpha_star={c['alpha_star']:.12g} lambda_star={c['lambda_star']:.12g} "
          f"alpha_1={c['alpha_1']} alpha_3={c['alpha_3']} {c['note']}", file=sys.stderr)


if __name__ == "__main__":
    main()
