"""Count even and non-even solutions over a range of lambda by shooting.

    python3 scripts/solution_count.py --lambda-range 0.05 3.0 --points 30
"""
import argparse

import numpy as np

from lbl.problem import exponential_spec, power_spec
from lbl.shooting import find_solutions


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--l", type=float, default=1.0)
    ap.add_argument("--nonlinearity", choices=("exp", "power"), default="exp")
    ap.add_argument("--p", type=float, default=7.0)
    ap.add_argument("--lambda-range", type=float, nargs=2, default=(0.05, 3.0))
    ap.add_argument("--points", type=int, default=30)
    args = ap.parse_args(argv)

    spec = (power_spec(args.p, args.l) if args.nonlinearity == "power"
            else exponential_spec(args.l))
    print("lambda,even,non_even,max_sup_norm")
    for lam in np.geomspace(*args.lambda_range, args.points):
        sols = find_solutions(spec, lam)
        n_even = sum(s.is_even for s in sols)
        top = max((s.sup_norm for s in sols), default=float("nan"))
        print(f"{lam:.8g},{n_even},{len(sols) - n_even},{top:.8g}")


if __name__ == "__main__":
    main()
