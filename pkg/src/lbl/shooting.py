"""Shooting from the left endpoint and the non-even solutions it finds.

A shot solves ``u'' + lam |x|^l f(u) = 0`` with ``u(-1) = 0`` and
``u'(-1) = beta`` and records the first zero ``z(beta)`` beyond ``-1``.
Solutions of the Dirichlet problem are the roots of ``z(beta) = 1``.  The
derivative ``z'(beta)`` comes from the variational equation
``v'' + lam |x|^l f'(u) v = 0``, ``v(-1) = 0``, ``v'(-1) = 1``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ._kernels import FIELD_SHOT, pack
from .korman import (Generator, alpha_on_lower_branch,
                     alpha_on_upper_branch, cached_alpha_star, cached_generator,
                     korman_solution, lambda_of_alpha)
from .ode_core import IntegrationError, Trajectory, evaluate, first_root, integrate
from .problem import ProblemSpec, integral_M

EVEN = "even"
NON_EVEN = "non-even"

SYMMETRY_TOL = 1e-6
BASE_SCAN_POINTS = 400
MERGE_REL_WIDTH = 1e-4
# step cap for shots that are sampled, so the interpolant's second derivative
# is accurate enough to measure the ODE residual
SAMPLE_H_MAX = 1.0 / 64
MERGE_OFFSETS = np.geomspace(1e-5, 0.5, 80)

__all__ = [
    "ShootResult",
    "SolutionAtLambda",
    "NonEvenBranch",
    "BranchLostError",
    "shoot",
    "z_prime",
    "find_solutions",
    "solution_from_beta",
    "noneven_near_even",
    "even_betas",
    "scan_mismatch",
    "existence_bound_holds",
    "trace_noneven_branch",
    "EVEN",
    "NON_EVEN",
]


class BranchLostError(RuntimeError):
    """Continuation could not follow the non-even root to the next lambda."""


@dataclass(frozen=True)
class ShootResult:
    """One shot.  ``traj`` holds ``(u, u', v, v')``; ``z`` is None when ``u``
    stays positive up to the window end."""

    beta: float
    z: Optional[float]
    z_prime: Optional[float]
    traj: Trajectory
    lam: float
    slope_at_zero: Optional[float] = None

    @property
    def mismatch(self) -> float:
        """``z - 1``, with the window end standing in for a missing zero."""
        z = self.traj.t_end if self.z is None else self.z
        return z - 1.0


def _prm(spec: ProblemSpec, lam: float) -> np.ndarray:
    nl = spec.nonlinearity
    return pack([lam, spec.l, float(nl.code), nl.p_or_zero])


def shoot(spec: ProblemSpec, lam: float, beta: float, window_end: float = 4.0,
          variational: bool = True, h_max: float = 0.0) -> ShootResult:
    """Integrate from ``x = -1`` and locate the first zero in ``(-1, window_end]``."""
    if not (beta > 0 and lam > 0):
        raise ValueError("beta and lambda must be positive")
    if not window_end >= 1.0:
        raise ValueError("window_end must be >= 1")
    y0 = [0.0, beta, 0.0, 1.0] if variational else [0.0, beta]
    traj = integrate(FIELD_SHOT, -1.0, y0, float(window_end), spec.tol, _prm(spec, lam),
                     stop_index=0, stop_level=0.0, h_max=h_max,
                     breakpoints=(0.0,))
    if traj.ys[-1, 0] >= 0.0:
        return ShootResult(float(beta), None, None, traj, float(lam))
    ev = first_root(traj, 0, window=(float(traj.xs[-2]), float(traj.xs[-1])),
                    xtol=spec.root_tol)
    if ev is None:
        return ShootResult(float(beta), None, None, traj, float(lam))
    zp = None
    if variational:
        y, _ = evaluate(traj, ev.location)
        zp = -y[2] / y[1]
    return ShootResult(float(beta), ev.location, zp, traj, float(lam), ev.slope)


def z_prime(spec: ProblemSpec, lam: float, beta: float, window_end: float = 4.0) -> float:
    """``dz/dbeta = -v(z) / u'(z)``."""
    res = shoot(spec, lam, beta, window_end)
    if res.z is None:
        raise IntegrationError("no zero inside the shooting window", res.traj.t_end)
    return float(res.z_prime)


def _mismatch(spec, lam, beta, window_end=4.0) -> float:
    return shoot(spec, lam, beta, window_end, variational=False).mismatch


@dataclass(frozen=True)
class SolutionAtLambda:
    """A solution of the Dirichlet problem obtained by shooting.

    ``residual`` is the larger of ``|u(1)|`` and the ODE residual of the
    interpolant relative to ``max |u''|``.  ``asymmetry`` is
    ``max |u(x) - u(-x)| / sup_norm``.
    """

    lam: float
    beta: float
    x: np.ndarray
    u: np.ndarray
    du: np.ndarray
    sup_norm: float
    asymmetry: float
    symmetry: str
    residual: float
    mirror_beta: float
    pair: int = -1

    @property
    def is_even(self) -> bool:
        return self.symmetry == EVEN


def solution_from_beta(spec: ProblemSpec, lam: float, beta: float, n_samples: int = 1025,
                       symmetry_tol: float = SYMMETRY_TOL) -> SolutionAtLambda:
    """Shoot once and package the result as a Dirichlet solution candidate."""
    res = shoot(spec, lam, beta, h_max=SAMPLE_H_MAX)
    traj = res.traj
    end = min(1.0, traj.t_end)
    x = np.linspace(-1.0, 1.0, n_samples)
    xe = np.minimum(x, end)
    y, dy = evaluate(traj, xe)
    u, du, d2u = y[:, 0], y[:, 1], dy[:, 1]
    peak = first_root(traj, 1, window=(-1.0, end), xtol=spec.root_tol)
    sup = float(evaluate(traj, peak.location)[0][0]) if peak is not None else float(u.max())
    sup = max(sup, float(u.max()))
    asym = float(np.max(np.abs(u - u[::-1]))) / sup
    rhs = lam * np.abs(x) ** spec.l * spec.nonlinearity.f(u)
    ode = float(np.max(np.abs(d2u + rhs)) / max(np.max(np.abs(d2u)), 1e-300))
    end_val, end_slope = evaluate(traj, end)
    boundary = abs(float(end_val[0])) + abs(1.0 - end) * abs(float(end_slope[0]))
    return SolutionAtLambda(
        lam=float(lam), beta=float(beta), x=x, u=u, du=du, sup_norm=sup, asymmetry=asym,
        symmetry=NON_EVEN if asym > symmetry_tol else EVEN,
        residual=max(boundary, ode), mirror_beta=float(-end_val[1]))


def _polish(spec, lam, beta, lo=None, hi=None, iters=4) -> float:
    """A few Newton steps on ``z - 1`` using ``z'``, kept inside ``[lo, hi]``."""
    for _ in range(iters):
        res = shoot(spec, lam, beta)
        if res.z is None or not res.z_prime:
            break
        step = -(res.z - 1.0) / res.z_prime
        new = beta + step
        if (lo is not None and new < lo) or (hi is not None and new > hi) or new <= 0:
            break
        beta = new
        if abs(step) <= 1e-15 * beta:
            break
    return beta


def _root_in(spec, lam, a, b, fa=None) -> float:
    g = lambda t: _mismatch(spec, lam, t)
    r = brentq(g, a, b, xtol=1e-15 * max(a, 1.0), rtol=4e-15, maxiter=200)
    return _polish(spec, lam, r, a, b)


def _beta_window(spec: ProblemSpec, lam: float, gen: Generator) -> tuple:
    lo = min(1e-3, 0.1 * lam / (spec.l + 1.0))
    a_star = cached_alpha_star(spec)
    b = 10.0 * korman_solution(spec, gen, a_star, n_samples=3).beta
    below = 0
    for _ in range(60):
        below = below + 1 if _mismatch(spec, lam, b) < -0.1 else 0
        if below == 3:
            break
        b *= 2.0
    return lo, b


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(t) for t in items]


def scan_mismatch(spec: ProblemSpec, lam: float, betas: np.ndarray, threads: int = 1) -> np.ndarray:
    return np.array(_map(lambda b: _mismatch(spec, lam, b), betas, threads))


def _brackets(spec, lam, betas, F) -> list:
    """Sign-change intervals, after splitting near-tangent extrema."""
    pts = list(zip(betas, F))
    extra = []
    for i in range(1, len(F) - 1):
        d0, d1 = F[i] - F[i - 1], F[i + 1] - F[i]
        if d0 * d1 < 0 and abs(F[i]) < 0.1:
            sgn = 1.0 if d0 < 0 else -1.0   # +1 at a local minimum
            opt = minimize_scalar(lambda t: sgn * _mismatch(spec, lam, t),
                                  bounds=(betas[i - 1], betas[i + 1]), method="bounded",
                                  options={"xatol": 1e-12 * betas[i]})
            extra.append((float(opt.x), float(sgn * opt.fun)))
    pts = sorted(pts + extra)
    out = []
    for (a, fa), (b, fb) in zip(pts[:-1], pts[1:]):
        if fa == 0.0:
            out.append((a, a))
        elif fa * fb < 0:
            out.append((a, b))
    if pts and pts[-1][1] == 0.0:
        out.append((pts[-1][0], pts[-1][0]))
    return out


def find_solutions(spec: ProblemSpec, lam: float, gen: Optional[Generator] = None,
                   n_points: int = BASE_SCAN_POINTS, threads: int = 1,
                   symmetry_tol: float = SYMMETRY_TOL) -> List[SolutionAtLambda]:
    """All roots of ``z(beta) = 1`` seen by an adaptive geometric scan.

    Non-even solutions are returned together with their reflections and
    share a ``pair`` index.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    gen = cached_generator(spec) if gen is None else gen
    lo, hi = _beta_window(spec, lam, gen)
    betas = np.geomspace(lo, hi, n_points)
    F = scan_mismatch(spec, lam, betas, threads)
    roots = []
    for a, b in _brackets(spec, lam, betas, F):
        r = a if a == b else _root_in(spec, lam, a, b)
        if not any(abs(r - s) <= 1e-9 * s for s in roots):
            roots.append(r)
    sols = [solution_from_beta(spec, lam, r, symmetry_tol=symmetry_tol) for r in sorted(roots)]
    # close mirror pairs the scan did not resolve
    for s in list(sols):
        if s.is_even:
            continue
        if not any(abs(t.beta - s.mirror_beta) <= 1e-6 * s.mirror_beta for t in sols):
            m = _polish(spec, lam, s.mirror_beta, iters=8)
            sols.append(solution_from_beta(spec, lam, m, symmetry_tol=symmetry_tol))
    sols.sort(key=lambda s: s.beta)
    pair = 0
    taken = set()
    for i, s in enumerate(sols):
        if s.is_even or i in taken:
            continue
        for j in range(i + 1, len(sols)):
            t = sols[j]
            if j not in taken and not t.is_even and abs(t.beta - s.mirror_beta) <= 1e-6 * t.beta:
                taken.update((i, j))
                sols[i] = _with_pair(s, pair)
                sols[j] = _with_pair(t, pair)
                pair += 1
                break
    return sols


def _with_pair(s: SolutionAtLambda, pair: int) -> SolutionAtLambda:
    from dataclasses import replace
    return replace(s, pair=pair)


def even_betas(spec: ProblemSpec, lam: float, gen: Optional[Generator] = None) -> list:
    """Predicted slopes ``U'(-1)`` on the lower and upper even branch."""
    gen = cached_generator(spec) if gen is None else gen
    a_star = cached_alpha_star(spec)
    out = []
    for branch in (alpha_on_lower_branch, alpha_on_upper_branch):
        a = branch(spec, gen, lam, a_star)
        if a is not None:
            out.append(korman_solution(spec, gen, a, n_samples=3).beta)
    return out


def noneven_near_even(spec: ProblemSpec, lam: float, gen: Optional[Generator] = None,
                      offsets: np.ndarray = MERGE_OFFSETS) -> Optional[float]:
    """Non-even root to the right of the upper even root, if one exists.

    Scans ``beta_e (1 + r)`` for ``r`` in ``offsets``, where ``beta_e`` is the
    slope of the upper even solution at ``lam``.
    """
    gen = cached_generator(spec) if gen is None else gen
    a_up = alpha_on_upper_branch(spec, gen, lam, cached_alpha_star(spec))
    if a_up is None:
        return None
    be = korman_solution(spec, gen, a_up, n_samples=3).beta
    betas = be * (1.0 + offsets)
    F = scan_mismatch(spec, lam, betas)
    for a, b, fa, fb in zip(betas[:-1], betas[1:], F[:-1], F[1:]):
        if fa * fb < 0:
            r = _root_in(spec, lam, a, b)
            if solution_from_beta(spec, lam, r).symmetry == NON_EVEN:
                return r
    return None


@dataclass
class NonEvenBranch:
    """Non-even roots continued over a decreasing lambda grid.

    ``solutions[i]`` holds the tracked solution and its mirror at
    ``lambda_grid[i]``.  The merge bracket ``(lo, hi)`` has non-even roots
    next to the upper even root at ``lo`` and none at ``hi``.
    """

    lambda_grid: np.ndarray
    solutions: list
    merge_lambda: float
    merge_bracket: tuple
    alpha_2_estimate: float
    alpha_2_bracket: tuple
    sup_norms: np.ndarray = field(default_factory=lambda: np.empty(0))
    spec: Optional[ProblemSpec] = None

    def to_dict(self) -> dict:
        return {
            "schema_version": "1",
            "kind": "noneven_branch",
            "spec": self.spec.to_dict() if self.spec is not None else None,
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "beta": [[s.beta for s in pair] for pair in self.solutions],
            "sup_norm": [float(v) for v in self.sup_norms],
            "merge_lambda": self.merge_lambda,
            "merge_bracket": list(self.merge_bracket),
            "alpha_2_estimate": self.alpha_2_estimate,
            "alpha_2_bracket": list(self.alpha_2_bracket),
        }


def _continue(spec, lam, guess, window) -> Optional[float]:
    """Newton from ``guess``; fall back to a local bracket scan."""
    b = guess
    for _ in range(30):
        res = shoot(spec, lam, b)
        if res.z is None or not res.z_prime:
            break
        step = -(res.z - 1.0) / res.z_prime
        step = max(min(step, 0.5 * b), -0.5 * b)
        b += step
        if abs(step) <= 1e-14 * b:
            s = solution_from_beta(spec, lam, b)
            return b if s.symmetry == NON_EVEN else None
    lo, hi = guess / window, guess * window
    betas = np.geomspace(lo, hi, 41)
    F = scan_mismatch(spec, lam, betas)
    cands = []
    for a, c, fa, fc in zip(betas[:-1], betas[1:], F[:-1], F[1:]):
        if fa * fc < 0:
            r = _root_in(spec, lam, a, c)
            if solution_from_beta(spec, lam, r).symmetry == NON_EVEN:
                cands.append(r)
    if not cands:
        return None
    return min(cands, key=lambda r: abs(math.log(r / guess)))


def _first_pair(spec, lam, gen):
    sols = find_solutions(spec, lam, gen)
    ne = [s for s in sols if not s.is_even]
    if not ne:
        raise BranchLostError(f"no non-even solution at lambda={lam:.6g}")
    return min(ne, key=lambda s: s.beta)


def trace_noneven_branch(spec: ProblemSpec, gen: Optional[Generator], scan,
                         lambda_grid: Sequence[float], max_refine: int = 6) -> NonEvenBranch:
    """Follow one non-even root down ``lambda_grid`` and bracket the merge.

    ``scan`` supplies ``alpha_1`` and ``alpha_3`` (a :class:`SpectralScan`).
    """
    gen = cached_generator(spec) if gen is None else gen
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) >= 0) or grid[-1] <= 0:
        raise ValueError("lambda_grid must be positive and strictly decreasing")
    if scan.alpha_1 is None or scan.alpha_3 is None:
        raise ValueError("spectral scan did not locate alpha_1 and alpha_3")
    lam3 = lambda_of_alpha(spec, gen, scan.alpha_3)
    if grid[0] >= lam3:
        raise ValueError("lambda_grid must lie below lambda(alpha_3)")

    first = _first_pair(spec, grid[0], gen)
    lams, betas = [float(grid[0])], [first.beta]
    for target in grid[1:]:
        todo = [float(target)]
        depth = 0
        while todo:
            lam = todo[0]
            if len(betas) >= 2:
                slope = (betas[-1] - betas[-2]) / (lams[-1] - lams[-2])
                guess = betas[-1] + slope * (lam - lams[-1])
                if not guess > 0:
                    guess = betas[-1]
            else:
                guess = betas[-1]
            b = _continue(spec, lam, guess, 1.5)
            if b is None:
                depth += 1
                if depth > max_refine:
                    raise BranchLostError(
                        f"non-even root lost between lambda={lams[-1]:.6g} and {lam:.6g} "
                        f"(last beta={betas[-1]:.6g}, guess={guess:.6g})")
                todo.insert(0, math.sqrt(lams[-1] * lam))
                continue
            lams.append(lam)
            betas.append(b)
            todo.pop(0)
    keep = [i for i, lam in enumerate(lams) if np.any(np.isclose(lam, grid, rtol=0, atol=0))]
    solutions, sups = [], []
    for i in keep:
        s = solution_from_beta(spec, lams[i], betas[i])
        m = solution_from_beta(spec, lams[i], _polish(spec, lams[i], s.mirror_beta, iters=8))
        solutions.append((_with_pair(s, 0), _with_pair(m, 0)))
        sups.append(s.sup_norm)

    lo, hi = _merge_bracket(spec, gen, scan, float(grid[0]))
    a_star = cached_alpha_star(spec)
    a_hi = alpha_on_upper_branch(spec, gen, lo, a_star)
    a_lo = alpha_on_upper_branch(spec, gen, hi, a_star)
    mid = math.sqrt(lo * hi)
    return NonEvenBranch(
        lambda_grid=grid, solutions=solutions, merge_lambda=mid, merge_bracket=(lo, hi),
        alpha_2_estimate=alpha_on_upper_branch(spec, gen, mid, a_star),
        alpha_2_bracket=(a_lo, a_hi), sup_norms=np.array(sups), spec=spec)


def _merge_bracket(spec, gen, scan, lam_true) -> tuple:
    a_star = cached_alpha_star(spec)
    lam_star = lambda_of_alpha(spec, gen, a_star)
    lam1 = lambda_of_alpha(spec, gen, scan.alpha_1)
    if noneven_near_even(spec, lam_true, gen) is None:
        raise BranchLostError(f"no non-even root near the even branch at lambda={lam_true:.6g}")
    lam_false = min(1.02 * lam1, 0.5 * (lam1 + lam_star))
    while noneven_near_even(spec, lam_false, gen) is not None:
        lam_false = 0.5 * (lam_false + lam_star)
        if lam_star - lam_false < 1e-9 * lam_star:
            raise BranchLostError("non-even roots persist up to the turning point")
    lo, hi = lam_true, lam_false
    while hi - lo > MERGE_REL_WIDTH * lo:
        mid = 0.5 * (lo + hi)
        if noneven_near_even(spec, mid, gen) is not None:
            lo = mid
        else:
            hi = mid
    return lo, hi


def existence_bound_holds(spec: ProblemSpec, sol: SolutionAtLambda) -> tuple:
    """``M f(|u|) > 2 beta`` and ``M f(|u|) > |u|`` with ``M = lam * 2/(l+1)``."""
    m = sol.lam * integral_M(spec.l)
    mf = m * float(spec.nonlinearity.f(sol.sup_norm))
    return mf > 2.0 * sol.beta, mf > sol.sup_norm
