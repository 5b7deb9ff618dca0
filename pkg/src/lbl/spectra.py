"""Linearized Dirichlet spectrum along the even branch.

Eigenvalues of ``phi'' + q(x) phi + mu phi = 0``, ``phi(-1) = phi(1) = 0``
with ``q = lam |x|^l f'(U)`` are found with the Pruefer angle
``theta' = cos^2 theta + (q + mu) sin^2 theta``.  Because ``q`` is even, modes
split by parity and each is computed on ``[0, 1]``: even modes start from
``theta(0) = pi/2`` (``phi'(0) = 0``), odd modes from ``theta(0) = 0``; the
j-th mode of either parity ends at ``theta(1) = j pi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._kernels import FIELD_LINEAR, FIELD_PRUEFER, NO_TRAJ, _q_vec
from .korman import EvenSolution, Generator, _depth_of, ensure_depth, eta, find_alpha_star
from .ode_core import Trajectory, evaluate, integrate
from .problem import ProblemSpec

__all__ = [
    "LinearizedPotential",
    "EigenResult",
    "SpectralScan",
    "SpectralAnomaly",
    "EigenvalueBracketError",
    "branch_potential",
    "constant_potential",
    "pruefer_angle",
    "eigenvalue",
    "eigenvalue_full",
    "eigenvalues",
    "morse_index",
    "is_degenerate",
    "scan_branch",
    "identity_terms",
    "identity_residual",
    "DEGENERACY_TOL",
]

EVEN, ODD = "even", "odd"
DEGENERACY_TOL = 1e-5
NEWTON_SWITCH_WIDTH = 1e-4
_MODE_CONST, _MODE_BRANCH = 0.0, 1.0


class SpectralAnomaly(RuntimeError):
    """A computed spectrum contradicts the expected structure (e.g. mu_3 <= 0)."""


class EigenvalueBracketError(RuntimeError):
    pass




@dataclass(frozen=True)
class LinearizedPotential:
    """Coefficient ``q(x) = lam(alpha) |x|^l f'(U(x; alpha))`` (even in x).

    Evaluated exactly through the generator: ``q(x) = s_1^2 s^l f'(w(s))``
    with ``s = s_1 |x|`` and ``s_1`` the generator abscissa at ``|x| = 1``.
    """

    alpha: Optional[float]
    params: np.ndarray
    arrays: tuple
    spec: Optional[ProblemSpec] = None
    tol: tuple = (1e-10, 1e-12)
    x: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 1.0, 513))

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return _q_vec(x, self.params, *self.arrays)

    @property
    def q(self) -> np.ndarray:
        """Samples on ``self.x``."""
        return self(self.x)

    @property
    def q_max(self) -> float:
        return float(np.max(self(np.linspace(0.0, 1.0, 4001))))

    def numba_prm(self, mu: float) -> tuple:
        pp = self.params.copy()
        pp[9] = mu
        return (pp, *self.arrays)


def constant_potential(c: float = 0.0, tol=(1e-10, 1e-12)) -> LinearizedPotential:
    pp = np.zeros(10)
    pp[0], pp[1] = _MODE_CONST, c
    return LinearizedPotential(None, pp, NO_TRAJ, None, tol)


def branch_potential(spec: ProblemSpec, gen: Generator, alpha: float) -> LinearizedPotential:
    gen = ensure_depth(gen, _depth_of(spec, alpha))
    scale = eta(gen, _depth_of(spec, alpha))
    pp = np.zeros(10)
    pp[0] = _MODE_BRANCH
    pp[2] = scale
    pp[3:9] = gen.params
    return LinearizedPotential(float(alpha), pp, gen.numba_args(), spec, spec.tol)


def pruefer_angle(pot: LinearizedPotential, mu: float, parity: str = EVEN,
                  with_derivative: bool = False):
    """Terminal Pruefer angle ``theta(1)`` (and ``d theta(1)/d mu``)."""
    if parity == EVEN:
        theta0 = 0.5 * math.pi
    elif parity == ODD:
        theta0 = 0.0
    else:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    traj = integrate(FIELD_PRUEFER, 0.0, np.array([theta0, 0.0]), 1.0, pot.tol,
                     pot.numba_prm(mu))
    theta, dtheta = traj.ys[-1]
    return (float(theta), float(dtheta)) if with_derivative else float(theta)


def _full_angle(pot, mu):
    traj = integrate(FIELD_PRUEFER, -1.0, np.array([0.0, 0.0]), 1.0, pot.tol,
                     pot.numba_prm(mu))
    return float(traj.ys[-1, 0]), float(traj.ys[-1, 1])


def _solve_angle(angle, target, q_max, mu_guess=None):
    """Find mu with angle(mu) = target; angle is increasing in mu."""
    lo = -q_max - 1.0
    hi = (1.5 * math.pi) ** 2 + q_max
    th_lo, _ = angle(lo)
    n = 0
    while th_lo >= target:
        lo = 2.0 * lo - 1.0
        th_lo, _ = angle(lo)
        n += 1
        if n > 60:
            raise EigenvalueBracketError("cannot bracket eigenvalue from below")
    th_hi, _ = angle(hi)
    n = 0
    while th_hi <= target:
        lo, th_lo = hi, th_hi
        hi = 2.0 * hi + 1.0
        th_hi, _ = angle(hi)
        n += 1
        if n > 60:
            raise EigenvalueBracketError("cannot bracket eigenvalue from above")
    while hi - lo > NEWTON_SWITCH_WIDTH * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        th, _ = angle(mid)
        if th < target:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    for _ in range(50):
        th, dth = angle(mu)
        resid = th - target
        if resid < 0:
            lo = mu
        else:
            hi = mu
        if resid == 0.0:
            break
        step = resid / dth if dth > 0 else math.inf
        mu_new = mu - step
        if not lo <= mu_new <= hi:
            mu_new = 0.5 * (lo + hi)
        if abs(mu_new - mu) <= 1e-13 * max(1.0, abs(mu)):
            mu = mu_new
            break
        mu = mu_new
    return mu


@dataclass(frozen=True)
class EigenResult:
    """k-th Dirichlet eigenpair on (-1, 1); ``phi`` sampled on ``x``."""

    k: int
    mu: float
    parity: str
    zeros: int
    x: np.ndarray
    phi: np.ndarray
    half: Trajectory = field(repr=False, default=None)
    norm: float = 1.0

    def phi_at(self, x):
        """Normalized eigenfunction at ``x`` in [-1, 1]."""
        x = np.asarray(x, dtype=float)
        y, _ = evaluate(self.half, np.abs(x))
        v = y[..., 0] / self.norm
        return v * np.sign(x) if self.parity == ODD else v

    def dphi_at(self, x):
        x = np.asarray(x, dtype=float)
        y, _ = evaluate(self.half, np.abs(x))
        v = y[..., 1] / self.norm
        return v if self.parity == ODD else v * np.sign(x)


def _parity_of(k: int) -> tuple:
    if k < 1:
        raise ValueError("eigenvalue index starts at 1")
    parity = EVEN if k % 2 == 1 else ODD
    return parity, (k + 1) // 2


def _count_sign_changes(v) -> int:
    s = np.sign(v)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _reconstruct(pot, mu, k, parity, n_grid=1025):
    y0 = np.array([1.0, 0.0]) if parity == EVEN else np.array([0.0, 1.0])
    half = integrate(FIELD_LINEAR, 0.0, y0, 1.0, pot.tol, pot.numba_prm(mu))
    x = np.linspace(-1.0, 1.0, n_grid)
    y, _ = evaluate(half, np.abs(x))
    phi = y[:, 0] * (np.sign(x) if parity == ODD else 1.0)
    norm = float(np.max(np.abs(y[:, 0])))
    # positive near the left end of (0, 1) for odd modes, positive at 0 for even
    phi = phi / norm
    mids = 0.5 * (x[1:] + x[:-1])
    zeros = _count_sign_changes(
        evaluate(half, np.abs(mids))[0][:, 0] * (np.sign(mids) if parity == ODD else 1.0))
    return EigenResult(k, float(mu), parity, zeros, x, phi, half, norm)


def eigenvalue(pot: LinearizedPotential, k: int) -> EigenResult:
    """k-th eigenvalue by parity reduction to [0, 1]."""
    parity, j = _parity_of(k)
    target = j * math.pi
    angle = lambda mu: pruefer_angle(pot, mu, parity, with_derivative=True)
    mu = _solve_angle(angle, target, pot.q_max)
    return _reconstruct(pot, mu, k, parity)


def eigenvalue_full(pot: LinearizedPotential, k: int) -> float:
    """k-th eigenvalue from the Pruefer angle on the whole of [-1, 1]."""
    if k < 1:
        raise ValueError("eigenvalue index starts at 1")
    return _solve_angle(lambda mu: _full_angle(pot, mu), k * math.pi, pot.q_max)


def eigenvalues(pot: LinearizedPotential, kmax: int = 3) -> list:
    return [eigenvalue(pot, k) for k in range(1, kmax + 1)]


def is_degenerate(mu: float, mu3: float) -> bool:
    return abs(mu) < DEGENERACY_TOL * (1.0 + abs(mu3))


def morse_index(pot: LinearizedPotential, mus=None) -> int:
    """Number of negative Dirichlet eigenvalues.

    Eigenvalues within the degeneracy tolerance of zero are not counted.
    Raises :class:`SpectralAnomaly` if ``mu_3 <= 0``, in which case the
    count would need more than three eigenvalues.
    """
    if mus is None:
        mus = [e.mu for e in eigenvalues(pot, 3)]
    mu1, mu2, mu3 = mus[:3]
    if mu3 <= 0:
        raise SpectralAnomaly(f"mu_3 = {mu3:.6g} <= 0 at alpha = {pot.alpha}")
    return sum(1 for m in (mu1, mu2) if m < 0 and not is_degenerate(m, mu3))


@dataclass
class SpectralScan:
    alpha_grid: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    mu3: np.ndarray
    morse: np.ndarray
    alpha_star: float
    alpha_1: Optional[float] = None
    alpha_3: Optional[float] = None
    mu2_crossings: list = field(default_factory=list)
    mu1_crossings: list = field(default_factory=list)
    note: str = ""

    @property
    def found(self) -> bool:
        return self.alpha_1 is not None


def _mu_at(spec, gen, alpha, k):
    return eigenvalue(branch_potential(spec, gen, alpha), k).mu


def _refine_crossing(spec, gen, k, a, b, xtol=1e-12):
    return float(brentq(lambda al: _mu_at(spec, gen, al, k), a, b, xtol=xtol, rtol=1e-14))


def _row(spec, gen, alpha):
    res = eigenvalues(branch_potential(spec, gen, alpha), 3)
    return [r.mu for r in res]


def scan_branch(spec: ProblemSpec, gen: Generator, alpha_grid, threads: int = 1) -> SpectralScan:
    """mu_1..mu_3 along the branch; locates the sign changes of mu_1 and mu_2."""
    grid = np.asarray(alpha_grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("alpha grid must be increasing")
    gen = ensure_depth(gen, _depth_of(spec, grid[-1]))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(lambda a: _row(spec, gen, a), grid))
    else:
        rows = [_row(spec, gen, a) for a in grid]
    mus = np.array(rows)
    mu1, mu2, mu3 = mus.T
    if np.any(mu3 <= 0):
        bad = grid[mu3 <= 0]
        raise SpectralAnomaly(f"mu_3 <= 0 at alpha = {bad}")
    morse = np.array([sum(1 for m in (a, b) if m < 0 and not is_degenerate(m, c))
                      for a, b, c in mus])
    alpha_star = find_alpha_star(spec, gen)

    def crossings(mu, k):
        idx = np.nonzero(np.sign(mu[1:]) != np.sign(mu[:-1]))[0]
        return [_refine_crossing(spec, gen, k, grid[i], grid[i + 1]) for i in idx]

    c1 = crossings(mu1, 1)
    c2 = crossings(mu2, 2)
    scan = SpectralScan(grid, mu1, mu2, mu3, morse, alpha_star,
                        mu2_crossings=c2, mu1_crossings=c1)
    if c2:
        scan.alpha_1, scan.alpha_3 = c2[0], c2[-1]
        if not alpha_star < scan.alpha_1:
            scan.note = "alpha_1 does not exceed alpha_star"
    else:
        scan.note = (f"no mu_2 sign change up to alpha = {grid[-1]:g}; "
                     f"largest mu_2 observed {mu2.max():.6g}")
    return scan


# -- integral identity for the second eigenfunction -------------------------

def _gauss_panels(a, b, n_panels, order=12):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate([np.geomspace(a, 0.05, n_panels // 4, endpoint=False),
                            np.linspace(0.05, b, n_panels - n_panels // 4 + 1)])
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * weights
    return x.ravel(), w.ravel()


def identity_terms(spec: ProblemSpec, sol: EvenSolution, eig2: EigenResult,
                   delta: float = 1e-8, n_panels: int = 400) -> tuple:
    """The two terms whose sum vanishes for the second eigenpair.

    ``T1 = mu_2 * int_0^1 phi_2 y`` with ``y = x U - (x - 1)^2 U'`` and
    ``T2 = lam * int_0^1 x^(l-1) H f(U) phi_2`` with
    ``H = (g(U) + l + 3) x^2 - 2 (l + 2) x + l``, ``g = s f'(s) / f(s)``.
    """
    if eig2.k != 2:
        raise ValueError("identity needs the second eigenpair")
    l = spec.l
    nl = spec.nonlinearity
    x, w = _gauss_panels(delta, 1.0, n_panels)
    U = sol.U(x)
    dU = sol.dU(x)
    phi = eig2.phi_at(x)
    y = x * U - (x - 1.0) ** 2 * dU
    H = (nl.g(U) + l + 3.0) * x ** 2 - 2.0 * (l + 2.0) * x + l
    T1 = eig2.mu * np.sum(w * phi * y)
    T2 = np.sum(w * x ** (l - 1.0) * H * nl.f(U) * phi)
    # [0, delta]: phi ~ phi'(0) x, H ~ l, U ~ alpha
    slope0 = float(eig2.dphi_at(0.0))
    T2 += l * float(nl.f(sol.alpha)) * slope0 * delta ** (l + 1.0) / (l + 1.0)
    # the [0, delta] part of T1 is O(delta^3)
    return float(T1), float(sol.lam * T2)


def identity_residual(spec: ProblemSpec, sol: EvenSolution, eig2: EigenResult,
                      relative: bool = False) -> float:
    T1, T2 = identity_terms(spec, sol, eig2)
    r = abs(T1 + T2)
    return r / max(abs(T1), abs(T2)) if relative else r
