"""Command-line front end.

Data goes to stdout (or ``--output``), diagnostics to stderr.  Exit codes:
0 success, 1 verification or oracle failure, 2 usage error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

ENV_TOL_REL = "LBL_TOL_REL"
ENV_TOL_ABS = "LBL_TOL_ABS"
ENV_ALPHA_MAX = "LBL_ALPHA_MAX"

DEFAULT_POWER_P = 7.0
CSV_COMMANDS = ("korman", "trace", "verify")


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    command: str
    l: float = 1.0
    nonlinearity: str = "exp"
    p: Optional[float] = None
    alpha: Optional[float] = None
    alpha_range: Optional[tuple] = None
    alpha_points: int = 200
    lam: Optional[float] = None
    lambda_range: Optional[tuple] = None
    lambda_points: int = 17
    samples: int = 33
    tol_rel: Optional[float] = None
    tol_abs: Optional[float] = None
    alpha_max: Optional[float] = None
    output: Optional[str] = None
    fmt: str = "json"
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def spec(self):
        from .problem import Nonlinearity, ProblemSpec
        nl = (Nonlinearity.power(self.p) if self.nonlinearity == "power"
              else Nonlinearity.exponential())
        kw = {}
        if self.tol_rel is not None:
            kw["rtol"] = self.tol_rel
        if self.tol_abs is not None:
            kw["atol"] = self.tol_abs
        if self.alpha_max is not None:
            kw["alpha_max"] = self.alpha_max
        return ProblemSpec(l=self.l, nonlinearity=nl, **kw)


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _nonneg(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be >= 0 and finite: {text!r}")
    return v


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("problem")
    g.add_argument("--l", type=_nonneg, default=1.0, help="exponent of |x| (default 1)")
    g.add_argument("--nonlinearity", choices=("exp", "power"), default="exp")
    g.add_argument("--p", type=_positive, help=f"power exponent (power only, default "
                                               f"{DEFAULT_POWER_P:g})")
    g = common.add_argument_group("numerics")
    g.add_argument("--tol-rel", type=_positive, help=f"relative tolerance (env {ENV_TOL_REL})")
    g.add_argument("--tol-abs", type=_positive, help=f"absolute tolerance (env {ENV_TOL_ABS})")
    g.add_argument("--alpha-max", type=_positive,
                   help=f"largest sup-norm handled (env {ENV_ALPHA_MAX})")
    g.add_argument("--threads", type=_count, default=1)
    g.add_argument("--seedless", action="store_true",
                   help="accepted for scripting; every computation is deterministic")
    g = common.add_argument_group("output")
    g.add_argument("--output", help="write to this file instead of stdout")
    g.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="lbl", description="Even and non-even solution branches of "
                     "u'' + lam |x|^l f(u) = 0 on (-1, 1), u(-1) = u(1) = 0.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("korman", parents=[common], help="lambda(alpha) and samples of U")
    p.add_argument("--alpha", type=_positive, required=True)
    p.add_argument("--samples", type=_count, default=33,
                   help="points on [0, 1]; output has 2*SAMPLES-1 points on [-1, 1]")

    p = sub.add_parser("spectrum", parents=[common], help="mu_1..mu_3 and Morse index at alpha")
    p.add_argument("--alpha", type=_positive, required=True)

    p = sub.add_parser("trace", parents=[common], help="even-branch table")
    p.add_argument("--alpha-range", type=_positive, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--alpha-points", type=_count, default=200)

    p = sub.add_parser("noneven", parents=[common],
                       help="solutions at one lambda, or a non-even branch trace")
    p.add_argument("--lambda", dest="lam", type=_positive)
    p.add_argument("--lambda-range", type=_positive, nargs=2, metavar=("LO", "HI"),
                   help="trace down from HI to LO (both below lambda(alpha_3))")
    p.add_argument("--lambda-points", type=_count, default=17)
    p.add_argument("--alpha-range", type=_positive, nargs=2, metavar=("LO", "HI"),
                   help="alpha grid of the spectral scan used to find alpha_1, alpha_3")
    p.add_argument("--alpha-points", type=_count, default=200)

    p = sub.add_parser("verify", parents=[common], help="full verification report")
    p.add_argument("--alpha-range", type=_positive, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--alpha-points", type=_count, default=200)

    sub.add_parser("oracle", parents=[common], help="closed-form self-tests")
    return parser


def _env_float(name: str, env) -> Optional[float]:
    raw = env.get(name)
    if raw is None or raw == "":
        return None
    try:
        v = float(raw)
    except ValueError:
        raise UsageError(f"environment variable {name}={raw!r} is not a number")
    if not (v > 0 and math.isfinite(v)):
        raise UsageError(f"environment variable {name}={raw!r} must be positive")
    return v


def parse_config(argv: Sequence[str], env=None) -> CliConfig:
    """Parse and validate; raises :class:`UsageError` before any computation."""
    env = os.environ if env is None else env
    ns = build_parser().parse_args(list(argv))
    if ns.p is not None and ns.nonlinearity != "power":
        raise UsageError("--p requires --nonlinearity power")
    p = None
    if ns.nonlinearity == "power":
        p = DEFAULT_POWER_P if ns.p is None else ns.p
        if not p > 1:
            raise UsageError("--p must exceed 1")
    if ns.format == "csv" and ns.command not in CSV_COMMANDS:
        raise UsageError(f"--format csv is available for {', '.join(CSV_COMMANDS)} only")
    cfg = CliConfig(command=ns.command, l=ns.l, nonlinearity=ns.nonlinearity, p=p,
                    output=ns.output, fmt=ns.format, threads=ns.threads)
    cfg.tol_rel = ns.tol_rel if ns.tol_rel is not None else _env_float(ENV_TOL_REL, env)
    cfg.tol_abs = ns.tol_abs if ns.tol_abs is not None else _env_float(ENV_TOL_ABS, env)
    cfg.alpha_max = ns.alpha_max if ns.alpha_max is not None else _env_float(ENV_ALPHA_MAX, env)
    cfg.alpha = getattr(ns, "alpha", None)
    cfg.samples = getattr(ns, "samples", 33)
    cfg.alpha_points = getattr(ns, "alpha_points", 200)
    cfg.lambda_points = getattr(ns, "lambda_points", 17)
    cfg.lam = getattr(ns, "lam", None)
    ar = getattr(ns, "alpha_range", None)
    if ar is not None:
        if not ar[0] < ar[1]:
            raise UsageError("--alpha-range needs LO < HI")
        cfg.alpha_range = tuple(ar)
    lr = getattr(ns, "lambda_range", None)
    if lr is not None:
        if not lr[0] < lr[1]:
            raise UsageError("--lambda-range needs LO < HI")
        cfg.lambda_range = tuple(lr)
    if cfg.command == "noneven" and (cfg.lam is None) == (cfg.lambda_range is None):
        raise UsageError("noneven needs exactly one of --lambda or --lambda-range")
    try:
        spec = cfg.spec()
    except ValueError as exc:
        raise UsageError(str(exc))
    if cfg.alpha is not None and cfg.alpha > spec.alpha_max:
        raise UsageError(f"--alpha {cfg.alpha:g} exceeds alpha_max {spec.alpha_max:g}")
    if cfg.alpha_range is not None and cfg.alpha_range[1] > spec.alpha_max:
        raise UsageError(f"--alpha-range upper end exceeds alpha_max {spec.alpha_max:g}")
    return cfg


# -- commands ----------------------------------------------------------------

def _alpha_grid(cfg, spec):
    from .diagram import default_alpha_grid
    if cfg.alpha_range is None:
        return default_alpha_grid(spec, cfg.alpha_points)
    return np.geomspace(cfg.alpha_range[0], cfg.alpha_range[1], cfg.alpha_points)


def _cmd_korman(cfg, spec):
    from .korman import cached_generator, korman_solution
    sol = korman_solution(spec, cached_generator(spec), cfg.alpha, n_samples=max(cfg.samples, 2))
    keep = sol.x >= 0.0
    x = np.concatenate([-sol.x[keep][::-1][:-1], sol.x[keep]])
    U, dU = sol.U(x), sol.dU(x)
    if cfg.fmt == "csv":
        rows = [("x", "U", "dU")] + [tuple(format(v, ".17g") for v in r) for r in zip(x, U, dU)]
        return EXIT_OK, "".join(",".join(r) + "\n" for r in rows)
    doc = {"schema_version": "1", "kind": "korman", "spec": spec.to_dict(),
           "alpha": sol.alpha, "lambda": sol.lam, "eta": sol.scale, "beta": sol.beta,
           "residual": sol.residual(), "x": x.tolist(), "U": U.tolist(), "dU": dU.tolist()}
    return EXIT_OK, _dump(doc)


def _cmd_spectrum(cfg, spec):
    from .korman import cached_generator, lambda_of_alpha
    from .spectra import branch_potential, eigenvalues, is_degenerate, morse_index
    gen = cached_generator(spec)
    pot = branch_potential(spec, gen, cfg.alpha)
    eig = eigenvalues(pot, 3)
    mus = [e.mu for e in eig]
    doc = {"schema_version": "1", "kind": "spectrum", "spec": spec.to_dict(),
           "alpha": cfg.alpha, "lambda": lambda_of_alpha(spec, gen, cfg.alpha),
           "mu": mus, "parity": [e.parity for e in eig], "zeros": [e.zeros for e in eig],
           "morse": morse_index(pot, mus),
           "degenerate": bool(any(is_degenerate(m, mus[2]) for m in mus[:2]))}
    return EXIT_OK, _dump(doc)


def _cmd_trace(cfg, spec):
    from .diagram import trace_even_branch
    return EXIT_OK, _export(trace_even_branch(spec, _alpha_grid(cfg, spec), cfg.threads), cfg)


def _solution_doc(s):
    return {"beta": s.beta, "symmetry": s.symmetry, "sup_norm": s.sup_norm,
            "asymmetry": s.asymmetry, "residual": s.residual, "mirror_beta": s.mirror_beta,
            "pair": s.pair}


def _cmd_noneven(cfg, spec):
    from . import shooting
    from .korman import cached_generator
    gen = cached_generator(spec)
    if cfg.lam is not None:
        sols = shooting.find_solutions(spec, cfg.lam, gen, threads=cfg.threads)
        doc = {"schema_version": "1", "kind": "solutions", "spec": spec.to_dict(),
               "lambda": cfg.lam, "solutions": [_solution_doc(s) for s in sols]}
        return EXIT_OK, _dump(doc)
    from .spectra import scan_branch
    scan = scan_branch(spec, gen, _alpha_grid(cfg, spec), threads=cfg.threads)
    if not scan.found:
        raise shooting.BranchLostError(f"no mu_2 sign change: {scan.note}")
    lo, hi = cfg.lambda_range
    grid = np.geomspace(hi, lo, cfg.lambda_points)
    br = shooting.trace_noneven_branch(spec, gen, scan, grid)
    doc = br.to_dict()
    doc["alpha_1"], doc["alpha_3"] = scan.alpha_1, scan.alpha_3
    return EXIT_OK, _dump(doc)


def _cmd_verify(cfg, spec):
    from .diagram import verify
    grid = _alpha_grid(cfg, spec) if cfg.alpha_range is not None else None
    rep = verify(spec, grid, threads=cfg.threads)
    if rep.banner:
        print(rep.banner, file=sys.stderr)
    for item in rep.items:
        if item.status == "fail":
            print(f"FAIL {item.name}: {item.claim}", file=sys.stderr)
    return (EXIT_OK if rep.passed else EXIT_FAIL), _export(rep, cfg)


def _cmd_oracle(cfg, spec):
    from .oracles import run_all
    checks = run_all()
    for c in checks:
        if not c.passed:
            print(f"FAIL {c.name}: error {c.error:.3e} > {c.tolerance:.1e}", file=sys.stderr)
    doc = {"schema_version": "1", "kind": "oracle", "passed": all(c.passed for c in checks),
           "checks": [c.to_dict() for c in checks]}
    return (EXIT_OK if doc["passed"] else EXIT_FAIL), _dump(doc)


COMMANDS = {
    "korman": _cmd_korman,
    "spectrum": _cmd_spectrum,
    "trace": _cmd_trace,
    "noneven": _cmd_noneven,
    "verify": _cmd_verify,
    "oracle": _cmd_oracle,
}


def _dump(doc) -> str:
    from .diagram import _clean
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def _export(obj, cfg) -> str:
    import io
    from .diagram import export
    buf = io.StringIO()
    export(obj, cfg.fmt, buf)
    return buf.getvalue()


def _numerical_errors() -> tuple:
    from .korman import DepthError
    from .ode_core import IntegrationError
    from .shooting import BranchLostError
    from .spectra import EigenvalueBracketError, SpectralAnomaly
    return (IntegrationError, DepthError, SpectralAnomaly, EigenvalueBracketError,
            BranchLostError, ArithmeticError)


def run(argv: Optional[Sequence[str]] = None, env=None, stdout=None) -> int:
    """Run one command; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv, env)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:   # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    spec = cfg.spec()
    numeric = _numerical_errors()
    try:
        code, text = COMMANDS[cfg.command](cfg, spec)
    except numeric as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.output:
        try:
            with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write {cfg.output}: {exc.strerror}", file=sys.stderr)
            return EXIT_NUMERIC
    else:
        stdout.write(text)
        stdout.flush()
    return code


def main() -> None:
    sys.exit(run())
