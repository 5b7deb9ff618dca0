"""Full analyses: even-branch sweeps, the verification report, and export."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import IO, Optional, Sequence, Union

import numpy as np

from . import shooting
from .korman import (cached_alpha_star, cached_generator,
                     ensure_depth, korman_solution, lambda_of_alpha, _depth_of)
from .problem import ProblemSpec
from .spectra import (SpectralScan, branch_potential, eigenvalues,
                      is_degenerate, scan_branch)

SCHEMA_VERSION = "1"
CSV_COLUMNS = ("alpha", "lambda", "sup_norm", "mu1", "mu2", "mu3", "morse", "degenerate")
LAMBDA_FACTORS = (0.8, 0.4, 0.1, 0.01)

PASS, FAIL, INFO = "pass", "fail", "info"

# named tolerances used by verify(); every one is copied into the report
TOLERANCES = {
    "decade_ratio": 0.5,
    "mu_degenerate": 5e-6,
    "mu_crossing": 1e-6,
    "alpha_star_match": 1e-6,
    "alpha_2_margin": 1e-2,
    "alpha_2_width_rel": 1e-2,
    "asymmetry_min": 1e-3,
    "bvp_residual": 1e-6,
    "mirror_closure": 1e-6,
    "even_beta_match": 1e-6,
    "tangency": 1e-8,
}

__all__ = [
    "EvenBranchPoint",
    "BranchTable",
    "CheckItem",
    "VerificationReport",
    "default_alpha_grid",
    "trace_even_branch",
    "verify",
    "export",
    "SCHEMA_VERSION",
    "CSV_COLUMNS",
]


@dataclass(frozen=True)
class EvenBranchPoint:
    alpha: float
    lam: float
    sup_norm: float
    mu1: float
    mu2: float
    mu3: float
    morse: int
    degenerate: bool

    def as_row(self) -> tuple:
        return (self.alpha, self.lam, self.sup_norm, self.mu1, self.mu2, self.mu3,
                self.morse, self.degenerate)


@dataclass
class BranchTable:
    """Rows of the even branch ordered by ``alpha`` plus located critical points."""

    spec: ProblemSpec
    rows: list
    critical: dict = field(default_factory=dict)
    scan: Optional[SpectralScan] = field(default=None, repr=False, compare=False)

    def column(self, name: str) -> np.ndarray:
        key = "lam" if name == "lambda" else name
        return np.array([getattr(r, key) for r in self.rows])

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "branch_table",
            "spec": self.spec.to_dict(),
            "columns": list(CSV_COLUMNS),
            "rows": [list(r.as_row()) for r in self.rows],
            "critical": dict(self.critical),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BranchTable":
        rows = [EvenBranchPoint(float(a), float(b), float(c), float(m1), float(m2), float(m3),
                                int(mo), bool(dg))
                for a, b, c, m1, m2, m3, mo, dg in d["rows"]]
        return cls(ProblemSpec.from_dict(d["spec"]), rows, dict(d["critical"]))


@dataclass(frozen=True)
class CheckItem:
    name: str
    claim: str
    status: str
    evidence: dict
    tolerance: dict

    @property
    def passed(self) -> bool:
        return self.status != FAIL


@dataclass
class VerificationReport:
    spec: ProblemSpec
    items: list
    banner: str = ""

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items)

    def item(self, name: str) -> CheckItem:
        for i in self.items:
            if i.name == name:
                return i
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "verification_report",
            "spec": self.spec.to_dict(),
            "banner": self.banner,
            "passed": self.passed,
            "items": [asdict(i) for i in self.items],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        items = [CheckItem(**i) for i in d["items"]]
        return cls(ProblemSpec.from_dict(d["spec"]), items, d.get("banner", ""))


def default_alpha_grid(spec: ProblemSpec, n: int = 200) -> np.ndarray:
    top = 50.0 if spec.is_power else 30.0
    return np.geomspace(1e-2, min(top, spec.alpha_max), n)


def trace_even_branch(spec: ProblemSpec, alpha_grid=None, threads: int = 1,
                      gen=None) -> BranchTable:
    """One row per ``alpha`` with eigenvalues, Morse index and degeneracy."""
    grid = default_alpha_grid(spec) if alpha_grid is None else np.asarray(alpha_grid, float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("alpha grid must be a non-empty 1-d sequence")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0) or grid[-1] > spec.alpha_max:
        raise ValueError("alpha grid must be increasing within (0, alpha_max]")
    gen = cached_generator(spec) if gen is None else gen
    gen = ensure_depth(gen, _depth_of(spec, grid[-1]))
    if grid.size > 1:
        scan = scan_branch(spec, gen, grid, threads=threads)
        mus = np.column_stack([scan.mu1, scan.mu2, scan.mu3])
        a_star = scan.alpha_star
    else:
        mus = np.array([[e.mu for e in eigenvalues(branch_potential(spec, gen, grid[0]), 3)]])
        scan = None
        a_star = cached_alpha_star(spec)
    rows = []
    for a, (m1, m2, m3) in zip(grid, mus):
        sol = korman_solution(spec, gen, a, n_samples=3)
        morse = sum(1 for m in (m1, m2) if m < 0 and not is_degenerate(m, m3))
        rows.append(EvenBranchPoint(
            float(a), float(sol.lam), float(sol.U(0.0)), float(m1), float(m2), float(m3),
            int(morse), bool(is_degenerate(m1, m3) or is_degenerate(m2, m3))))
    critical = {
        "alpha_star": a_star,
        "lambda_star": lambda_of_alpha(spec, gen, a_star),
        "alpha_1": None if scan is None else scan.alpha_1,
        "alpha_3": None if scan is None else scan.alpha_3,
        "mu2_crossings": [] if scan is None else list(scan.mu2_crossings),
        "alpha_2_bracket": None,
        "note": "" if scan is None else scan.note,
    }
    return BranchTable(spec, rows, critical, scan)


# -- verification ------------------------------------------------------------

def _item(name, claim, ok, evidence, tol_keys, gated=False) -> CheckItem:
    status = INFO if gated else (PASS if ok else FAIL)
    tol = {k: TOLERANCES[k] for k in tol_keys}
    return CheckItem(name, claim, status, _clean(evidence), tol)


def _clean(obj):
    """Plain JSON-compatible values (floats, ints, bools, lists, dicts, None)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _mus(spec, gen, alpha):
    return [e.mu for e in eigenvalues(branch_potential(spec, gen, alpha), 3)]


def _morse(mus):
    m1, m2, m3 = mus
    return sum(1 for m in (m1, m2) if m < 0 and not is_degenerate(m, m3))


def verify(spec: ProblemSpec, alpha_grid=None, lambda_factors: Sequence[float] = LAMBDA_FACTORS,
           threads: int = 1, table: Optional[BranchTable] = None) -> VerificationReport:
    """Check every claim about the even branch, its spectrum and the non-even branch.

    A ``table`` from :func:`trace_even_branch` for the same ``spec`` may be
    passed in to skip the sweep.
    """
    T = TOLERANCES
    gen = cached_generator(spec)
    if table is None:
        table = trace_even_branch(spec, alpha_grid, threads=threads, gen=gen)
    elif table.spec != spec:
        raise ValueError("table was computed for a different problem")
    scan = table.scan
    if scan is None:
        raise ValueError("verification needs an alpha grid with at least two points")
    gen = ensure_depth(gen, _depth_of(spec, scan.alpha_grid[-1]))
    grid = scan.alpha_grid
    lam = table.column("lambda")
    a_star = scan.alpha_star
    lam_star = lambda_of_alpha(spec, gen, a_star)
    gated = not spec.theorem_hypotheses_met
    banner = "" if not gated else (
        "theorem hypotheses unmet: need l > 0"
        + (" and (p - 1) l > 4" if spec.is_power else "")
        + "; second-eigenvalue items are informational")
    items = []

    # decay of lambda over the first and the last decade of the grid
    head, tail = lam[: min(10, lam.size)], lam[-min(10, lam.size):]
    low = lambda_of_alpha(spec, gen, grid[0]) / lambda_of_alpha(spec, gen, 10.0 * grid[0])
    high = lambda_of_alpha(spec, gen, grid[-1]) / lambda_of_alpha(spec, gen, 0.1 * grid[-1])
    ok = (low <= T["decade_ratio"] and high <= T["decade_ratio"]
          and bool(np.all(np.diff(head) > 0)) and bool(np.all(np.diff(tail) < 0)))
    items.append(_item("lambda_limits", "lambda(alpha) -> 0 as alpha -> 0 and as alpha -> inf",
                       ok, {"lambda_first": lam[0], "lambda_last": lam[-1],
                            "decade_ratio_low": low, "decade_ratio_high": high,
                            "lambda_star": lam_star}, ["decade_ratio"]))

    peak = int(np.argmax(lam))
    lo_a = grid[max(peak - 1, 0)]
    hi_a = grid[min(peak + 1, grid.size - 1)]
    unimodal = bool(np.all(np.diff(lam[: peak + 1]) > 0) and np.all(np.diff(lam[peak:]) < 0))
    mu1_cross = scan.mu1_crossings
    ok = (lo_a <= a_star <= hi_a and unimodal and len(mu1_cross) == 1
          and abs(mu1_cross[0] - a_star) <= T["alpha_star_match"] * max(1.0, a_star))
    items.append(_item("turning_point", "lambda has one maximum, at alpha_star, where mu_1 changes sign",
                       ok, {"alpha_star": a_star, "lambda_star": lam_star,
                            "grid_peak_bracket": [lo_a, hi_a], "unimodal": unimodal,
                            "mu1_crossings": mu1_cross}, ["alpha_star_match"]))

    below = grid < a_star
    m_below = scan.morse[below]
    ok = bool(np.all(m_below == 0) and np.all(scan.mu1[below] > 0))
    items.append(_item("i", "0 < alpha < alpha_star: Morse index 0, nondegenerate", ok,
                       {"points": int(below.sum()), "min_mu1": scan.mu1[below].min(initial=np.inf),
                        "morse_values": sorted(set(m_below.tolist()))}, []))

    mus_star = _mus(spec, gen, a_star)
    ok = abs(mus_star[0]) <= T["mu_degenerate"] and _morse(mus_star) == 0 and mus_star[1] > 0
    items.append(_item("ii", "alpha = alpha_star: Morse index 0, degenerate (mu_1 = 0)", ok,
                       {"mu": mus_star, "morse": _morse(mus_star)}, ["mu_degenerate"]))

    mu3_ok = bool(np.all(scan.mu3 > 0))
    items.append(_item("mu3_positive", "mu_3 > 0 along the whole branch", mu3_ok,
                       {"min_mu3": scan.mu3.min()}, []))

    a1, a3 = scan.alpha_1, scan.alpha_3
    found = a1 is not None
    if found:
        mid = (grid > a_star) & (grid < a1)
        ok = (a_star < a1 and bool(np.all(scan.morse[mid] == 1))
              and bool(np.all(scan.mu2[mid] > 0)) and bool(np.all(scan.mu1[mid] < 0)))
        items.append(_item("iii", "alpha_star < alpha < alpha_1: Morse index 1, nondegenerate",
                           ok, {"alpha_1": a1, "points": int(mid.sum()),
                                "min_mu2": scan.mu2[mid].min(initial=np.inf)}, [], gated))
        for name, label, a in (("iv", "alpha_1", a1), ("vi", "alpha_3", a3)):
            m = _mus(spec, gen, a)
            ok = abs(m[1]) <= T["mu_crossing"] and _morse(m) == 1
            items.append(_item(name, f"alpha = {label}: Morse index 1, degenerate (mu_2 = 0)", ok,
                               {"alpha": a, "mu": m, "morse": _morse(m),
                                "mu2_crossings": scan.mu2_crossings}, ["mu_crossing"], gated))
        above = grid > a3
        ok = bool(np.all(scan.morse[above] == 2)) and bool(scan.mu2[-1] < 0)
        items.append(_item("vii", "alpha > alpha_3: Morse index 2, nondegenerate", ok,
                           {"alpha_3": a3, "points": int(above.sum()),
                            "mu2_at_alpha_max": scan.mu2[-1]}, [], gated))
        items.extend(_noneven_items(spec, gen, scan, lambda_factors, gated))
    else:
        items.append(_item("alpha_1", "mu_2 changes sign on the scanned grid", False,
                           {"note": scan.note, "max_mu2": scan.mu2.max()}, [], gated))

    items.extend(_count_items(spec, gen, a_star, lam_star))
    return VerificationReport(spec, items, banner)


def _noneven_items(spec, gen, scan, factors, gated) -> list:
    T = TOLERANCES
    a1, a3 = scan.alpha_1, scan.alpha_3
    lam3 = lambda_of_alpha(spec, gen, a3)
    items = []
    evidence, ok_all, sups, bound_ok = [], True, [], True
    for fac in sorted(factors, reverse=True):
        lam = fac * lam3
        sols = shooting.find_solutions(spec, lam, gen)
        pairs = {}
        for s in sols:
            if not s.is_even and s.pair >= 0:
                pairs.setdefault(s.pair, []).append(s)
        good = [p for p in pairs.values()
                if len(p) == 2 and all(s.asymmetry > T["asymmetry_min"]
                                       and s.residual <= T["bvp_residual"] for s in p)]
        closure = None
        if good:
            u, v = good[0]
            closure = float(np.max(np.abs(u.u - v.u[::-1])) / u.sup_norm)
            sups.append(max(u.sup_norm, v.sup_norm))
            for s in good[0]:
                b2, bn = shooting.existence_bound_holds(spec, s)
                bound_ok = bound_ok and b2 and bn
        ok = bool(good) and closure is not None and closure <= T["mirror_closure"]
        ok_all = ok_all and ok
        evidence.append({
            "lambda_factor": fac, "lambda": lam, "n_solutions": len(sols),
            "n_even": sum(s.is_even for s in sols),
            "pair_beta": [s.beta for s in good[0]] if good else None,
            "asymmetry": good[0][0].asymmetry if good else None,
            "residual": max(s.residual for s in good[0]) if good else None,
            "mirror_closure": closure,
            "sup_norm": sups[-1] if good else None,
        })
    items.append(_item("noneven_existence",
                       "0 < lambda < lambda(alpha_3): a mirror pair of non-even solutions exists",
                       ok_all, {"samples": evidence},
                       ["asymmetry_min", "bvp_residual", "mirror_closure"], gated))
    grows = len(sups) == len(factors) and all(b > a for a, b in zip(sups[:-1], sups[1:]))
    items.append(_item("blow_up", "sup-norm of the non-even solution grows as lambda -> 0",
                       grows, {"lambda_factors": sorted(factors, reverse=True), "sup_norm": sups},
                       [], gated))
    items.append(_item("existence_bound", "M f(|u|) exceeds both 2 beta and |u| on every "
                       "verified non-even solution", bound_ok and bool(sups), {"checked": len(sups)},
                       [], gated))

    # merge bracketing of the symmetry-breaking point
    grid = lam3 * np.unique(np.concatenate([np.geomspace(0.9, min(factors), 17), factors]))[::-1]
    try:
        br = shooting.trace_noneven_branch(spec, gen, scan, grid)
        lo, hi = br.alpha_2_bracket
        width = hi - lo
        m = _mus(spec, gen, br.alpha_2_estimate)
        ok = (lo <= a3 + T["alpha_2_margin"] and hi >= a1 - T["alpha_2_margin"]
              and width <= T["alpha_2_width_rel"] * a3 and _morse(m) == 1)
        ev = {"alpha_2_bracket": [lo, hi], "alpha_2_estimate": br.alpha_2_estimate,
              "merge_bracket": list(br.merge_bracket), "alpha_1": a1, "alpha_3": a3,
              "mu_at_estimate": m, "branch_sup_norm": br.sup_norms}
    except shooting.BranchLostError as exc:
        ok, ev = False, {"error": str(exc)}
    items.append(_item("v", "alpha_2 in [alpha_1, alpha_3] is a non-even bifurcation point "
                       "with Morse index 1", ok, ev, ["alpha_2_margin", "alpha_2_width_rel"], gated))
    return items


def _count_items(spec, gen, a_star, lam_star) -> list:
    T = TOLERANCES
    items = []
    half = shooting.find_solutions(spec, 0.5 * lam_star, gen)
    even = [s for s in half if s.is_even]
    predicted = shooting.even_betas(spec, 0.5 * lam_star, gen)
    match = (len(even) == 2 and len(predicted) == 2
             and all(abs(s.beta - b) <= T["even_beta_match"] * max(1.0, b)
                     for s, b in zip(even, sorted(predicted))))
    over = shooting.find_solutions(spec, 1.5 * lam_star, gen)
    beta_star = korman_solution(spec, gen, a_star, n_samples=3).beta
    f0 = shooting._mismatch(spec, lam_star, beta_star)
    side = [shooting._mismatch(spec, lam_star, beta_star * (1 + r)) for r in (-1e-2, 1e-2)]
    tangent = abs(f0) <= T["tangency"] and side[0] * side[1] > 0
    items.append(_item("solution_count", "two even solutions below lambda_star, one at "
                       "lambda_star, none above", match and tangent and not over,
                       {"even_at_half": len(even), "even_betas": [s.beta for s in even],
                        "predicted_betas": sorted(predicted), "mismatch_at_top": f0,
                        "mismatch_beside_top": side, "solutions_above": len(over)},
                       ["even_beta_match", "tangency"]))
    return items


# -- export ------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return format(float(v), ".17g")


def _csv_text(obj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(obj, BranchTable):
        w.writerow(CSV_COLUMNS)
        for r in obj.rows:
            w.writerow([_fmt(v) for v in r.as_row()])
    elif isinstance(obj, VerificationReport):
        w.writerow(("item", "status", "claim"))
        for i in obj.items:
            w.writerow((i.name, i.status, i.claim))
    else:
        raise TypeError(f"cannot export {type(obj).__name__} as csv")
    return buf.getvalue()


def _json_text(obj) -> str:
    if not hasattr(obj, "to_dict"):
        raise TypeError(f"cannot export {type(obj).__name__} as json")
    return json.dumps(_clean(obj.to_dict()), indent=2, allow_nan=False) + "\n"


def export(obj: Union[BranchTable, VerificationReport, "shooting.NonEvenBranch"], fmt: str,
           destination: Union[str, os.PathLike, IO[str]]) -> None:
    """Write ``obj`` as CSV or JSON to a path or an open text stream."""
    if fmt == "csv":
        text = _csv_text(obj)
    elif fmt == "json":
        text = _json_text(obj)
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(destination)}: {exc.strerror}") from exc
