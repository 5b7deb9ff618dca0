"""Generator solution, its inverse and the closed-form even branch.

The generator ``w`` solves ``w'' + x^l f(w) = 0``, ``w(0) = w'(0) = 0``.  Every
positive even solution is a rescaling of it:

* exponential: ``lam(a) = eta(a)^(l+2) e^(-a)``,
  ``U(x; a) = w(eta(a)|x|) + a``;
* power: ``lam(a) = (a+1)^(1-p) eta(a/(a+1))^(l+2)``,
  ``U(x; a) = (a+1) w(eta(a/(a+1))|x|) + a``;

where ``eta`` is the inverse of ``-w``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._dense import _interp_component
from ._kernels import FIELD_GENERATOR, _series, pack
from .ode_core import Trajectory, evaluate, first_root, integrate
from .problem import (KIND_EXP, Nonlinearity, ProblemSpec, exponential_spec,
                      power_spec)

__all__ = [
    "ProblemSpec",
    "Nonlinearity",
    "exponential_spec",
    "power_spec",
    "Generator",
    "EvenSolution",
    "generate",
    "ensure_depth",
    "eta",
    "lambda_of_alpha",
    "dlambda_dalpha",
    "korman_solution",
    "psi",
    "find_alpha_star",
    "alpha_on_upper_branch",
    "alpha_on_lower_branch",
    "sample_grid",
    "cached_generator",
    "cached_alpha_star",
    "DepthError",
]

POWER_DEPTH_CAP = 1.0 - 1e-12


class DepthError(ValueError):
    """Requested depth is outside what the generator can provide."""


def _series_coefficients(l: float, nl: Nonlinearity) -> tuple:
    a = 1.0 / ((l + 1.0) * (l + 2.0))
    fp0 = 1.0 if nl.code == KIND_EXP else nl.p
    b = fp0 * a / ((2.0 * l + 3.0) * (2.0 * l + 4.0))
    return a, b


def _seed_length(l: float, atol: float) -> float:
    # first neglected term of the series is O(s^(3l+6))
    return min(0.05, (1e-3 * atol) ** (1.0 / (3.0 * l + 6.0)))


@dataclass(frozen=True)
class Generator:
    """Generator ``w`` on ``[0, x_max]``.

    The stored trajectory starts at ``x_seed``; on ``[0, x_seed)`` the series
    expansion is used directly.
    """

    spec: ProblemSpec
    traj: Trajectory
    x_seed: float
    series: tuple
    depth: float
    x1: Optional[float] = None

    @property
    def x_max(self) -> float:
        return self.x1 if self.x1 is not None else self.traj.t_end

    @property
    def params(self) -> np.ndarray:
        """Compact parameter vector used by compiled potentials."""
        nl = self.spec.nonlinearity
        return np.array([self.spec.l, nl.code, nl.p_or_zero, self.x_seed, *self.series])

    def numba_args(self) -> tuple:
        t = self.traj
        return (t.xs, t.ys, t.dys, t.corr)

    def w(self, s):
        """Return ``(w, w')`` at ``s >= 0``."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.traj.t_end):
            raise DepthError(f"abscissa outside [0, {self.traj.t_end}]")
        l = self.spec.l
        a, b = self.series
        small = s < self.x_seed
        out_w = np.empty_like(s)
        out_dw = np.empty_like(s)
        if np.any(small):
            ss = s[small]
            sl2 = ss ** (l + 2.0)
            out_w[small] = -a * sl2 + b * sl2 * sl2
            with np.errstate(invalid="ignore", divide="ignore"):
                dw = np.where(ss > 0, (-a * (l + 2.0) * sl2 + b * (2 * l + 4) * sl2 * sl2)
                              / np.where(ss > 0, ss, 1.0), 0.0)
            out_dw[small] = dw
        if np.any(~small):
            y, _ = evaluate(self.traj, s[~small])
            out_w[~small] = y[..., 0]
            out_dw[~small] = y[..., 1]
        return out_w, out_dw

    def w2(self, s):
        """Second derivative of ``w`` from the interpolant of ``w'``."""
        s = np.asarray(s, dtype=float)
        l = self.spec.l
        a, b = self.series
        small = s < self.x_seed
        out = np.empty_like(s)
        if np.any(small):
            ss = s[small]
            out[small] = (-a * (l + 2) * (l + 1) * ss ** l
                          + b * (2 * l + 4) * (2 * l + 3) * ss ** (2 * l + 2))
        if np.any(~small):
            _, dy = evaluate(self.traj, s[~small])
            out[~small] = dy[..., 1]
        return out

    def W(self, s):
        """Sign function of the turning-point condition.

        Exponential: ``s w'(s) + l + 2``.  Power:
        ``(p - 1) s w'(s) + (l + 2)(w(s) + 1)``.
        """
        w, dw = self.w(s)
        l = self.spec.l
        if self.spec.is_power:
            p = self.spec.nonlinearity.p
            return (p - 1.0) * np.asarray(s) * dw + (l + 2.0) * (w + 1.0)
        return np.asarray(s) * dw + l + 2.0


def generate(spec: ProblemSpec, depth: Optional[float] = None) -> Generator:
    """Integrate the generator until ``-w >= depth`` (or ``w = -1`` for power).

    ``depth`` defaults to ``alpha_max + 5`` for the exponential case.
    """
    nl = spec.nonlinearity
    l = float(spec.l)
    if spec.is_power:
        if depth is not None and depth > 1.0:
            raise DepthError(f"power generator depth must be <= 1, got {depth}")
        stop_level = -1.0
    else:
        if depth is None:
            depth = spec.alpha_max + 5.0
        if not depth > 0:
            raise DepthError("depth must be positive")
        stop_level = -float(depth)
    a, b = _series_coefficients(l, nl)
    x_seed = _seed_length(l, spec.generator_tol[1])
    w0, dw0 = _series(x_seed, l, a, b)
    prm = pack([l, nl.code, nl.p_or_zero])
    traj = integrate(FIELD_GENERATOR, x_seed, np.array([w0, dw0]), 1e8, spec.generator_tol, prm,
                     stop_index=0, stop_level=stop_level)
    if traj.ys[-1, 0] >= stop_level:
        raise DepthError("generator did not reach the requested depth")
    x1 = None
    if spec.is_power:
        ev = first_root(traj, 0, level=-1.0, xtol=spec.root_tol)
        x1 = ev.location
        depth = 1.0
    else:
        depth = float(-traj.ys[-1, 0])
    return Generator(spec, traj, x_seed, (a, b), depth, x1)


def ensure_depth(gen: Generator, depth: float) -> Generator:
    """Return ``gen`` or a deeper regeneration covering ``depth``."""
    if gen.spec.is_power or depth <= gen.depth:
        return gen
    return generate(gen.spec, max(depth * 1.25, gen.depth * 2.0))


def _depth_of(spec: ProblemSpec, alpha):
    return alpha / (alpha + 1.0) if spec.is_power else alpha


def eta(gen: Generator, t: float) -> float:
    """Abscissa ``x`` with ``-w(x) = t``."""
    t = float(t)
    if not t > 0:
        if t == 0:
            return 0.0
        raise DepthError(f"depth must be positive, got {t}")
    if gen.spec.is_power:
        if t >= 1.0:
            raise DepthError("power depth must be < 1")
        t = min(t, POWER_DEPTH_CAP)
    gen = ensure_depth(gen, t)
    l = gen.spec.l
    a, b = gen.series
    tol = gen.spec.root_tol * max(1.0, t)
    w_seed, _ = _series(gen.x_seed, l, a, b)
    if t <= -w_seed:
        x = (t / a) ** (1.0 / (l + 2.0))
        x = min(x, gen.x_seed)
        for _ in range(50):
            w, dw = _series(x, l, a, b)
            if dw == 0.0:
                break
            step = (-w - t) / (-dw)
            x_new = min(max(x - step, 0.5 * x), gen.x_seed)
            if abs(x_new - x) <= 1e-16 * x:
                x = x_new
                break
            x = x_new
        return float(x)
    traj = gen.traj
    depths = -traj.ys[:, 0]
    i = int(np.searchsorted(depths, t, side="left"))
    i = min(max(i, 1), depths.size - 1)
    lo, hi = traj.xs[i - 1], traj.xs[i]
    xs, ys, dys, corr = gen.numba_args()

    def g(x):
        w, dw = _interp_component(xs, ys, dys, corr, x, 0)
        return -w - t, -dw

    g_lo, _ = g(lo)
    x = lo + (hi - lo) * (t - depths[i - 1]) / (depths[i] - depths[i - 1])
    for _ in range(100):
        gx, dg = g(x)
        if abs(gx) <= tol:
            break
        if (gx < 0) == (g_lo < 0):
            lo, g_lo = x, gx
        else:
            hi = x
        x_new = x - gx / dg if dg > 0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if hi - lo < 1e-16 * max(1.0, abs(x)):
            break
        x = x_new
    return float(x)


def lambda_of_alpha(spec: ProblemSpec, gen: Generator, alpha: float) -> float:
    """Parameter value of the even solution with sup-norm ``alpha``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    l = spec.l
    if spec.is_power:
        p = spec.nonlinearity.p
        return float((alpha + 1.0) ** (1.0 - p) * eta(gen, alpha / (alpha + 1.0)) ** (l + 2.0))
    return float(eta(gen, alpha) ** (l + 2.0) * math.exp(-alpha))


def dlambda_dalpha(spec: ProblemSpec, gen: Generator, alpha: float) -> float:
    """Closed-form derivative of ``lambda_of_alpha``."""
    l = spec.l
    t = _depth_of(spec, alpha)
    s = eta(gen, t)
    w, dw = gen.w(s)
    w, dw = float(w), float(dw)
    if spec.is_power:
        p = spec.nonlinearity.p
        dbeta = -1.0 / dw / (alpha + 1.0) ** 2
        W = (p - 1.0) * s * dw + (l + 2.0) * (w + 1.0)
        return (w + 1.0) ** (p - 2.0) * s ** (l + 1.0) * W * dbeta
    return -(s * dw + l + 2.0) * s ** (l + 1.0) / (math.exp(alpha) * dw)


def sample_grid(n: int = 513) -> np.ndarray:
    """Points on [0, 1] clustered at both ends."""
    j = np.arange(n)
    x = 0.5 * (1.0 - np.cos(np.pi * j / (n - 1)))
    x[0], x[-1] = 0.0, 1.0
    return x


@dataclass(frozen=True)
class EvenSolution:
    """Korman solution ``U(x; alpha)`` at ``lam = lambda(alpha)``.

    ``scale`` is the generator abscissa reached at ``|x| = 1`` and
    ``amplitude`` the factor in front of ``w`` (1 or ``alpha + 1``).
    """

    spec: ProblemSpec
    gen: Generator
    alpha: float
    lam: float
    scale: float
    amplitude: float
    x: np.ndarray
    U_samples: np.ndarray
    dU_samples: np.ndarray

    @property
    def eta_alpha(self) -> float:
        return self.scale

    def _s(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > 1.0 + 1e-15):
            raise ValueError("x must lie in [-1, 1]")
        return x, np.minimum(self.scale * np.abs(x), self.scale)

    def U(self, x):
        x, s = self._s(x)
        w, _ = self.gen.w(s)
        return self.amplitude * w + self.alpha

    def dU(self, x):
        x, s = self._s(x)
        _, dw = self.gen.w(s)
        return self.amplitude * self.scale * dw * np.sign(x)

    def d2U(self, x):
        """Second derivative taken from the interpolant (not from the ODE)."""
        x, s = self._s(x)
        return self.amplitude * self.scale ** 2 * self.gen.w2(s)

    def residual(self, x=None) -> float:
        """Max of ``|U'' + lam |x|^l f(U)|`` on ``x`` (defaults to the samples)."""
        x = self.x if x is None else np.asarray(x)
        f = self.spec.nonlinearity.f(self.U(x))
        return float(np.max(np.abs(self.d2U(x) + self.lam * np.abs(x) ** self.spec.l * f)))

    @property
    def beta(self) -> float:
        """Slope ``U'(-1)``."""
        return float(self.dU(-1.0))


def korman_solution(spec: ProblemSpec, gen: Generator, alpha: float,
                    n_samples: int = 513) -> EvenSolution:
    t = _depth_of(spec, alpha)
    gen = ensure_depth(gen, t)
    s = eta(gen, t)
    amp = alpha + 1.0 if spec.is_power else 1.0
    lam = lambda_of_alpha(spec, gen, alpha)
    x = sample_grid(n_samples)
    proto = EvenSolution(spec, gen, float(alpha), lam, s, amp, x, x, x)
    return EvenSolution(spec, gen, float(alpha), lam, s, amp, x, proto.U(x), proto.dU(x))


def psi(spec: ProblemSpec, sol: EvenSolution, x):
    """Explicit solution of the linearized equation along the branch.

    Exponential: ``x U' + l + 2``; power: ``x U' + (l + 2)/(p - 1) (U + 1)``.
    """
    x = np.asarray(x, dtype=float)
    _, s = sol._s(x)
    W = sol.gen.W(s)
    if spec.is_power:
        return (sol.alpha + 1.0) / (spec.nonlinearity.p - 1.0) * W
    return W


def find_alpha_star(spec: ProblemSpec, gen: Generator) -> float:
    """Sup-norm at the turning point, where ``lambda`` is maximal."""
    if not spec.is_power:
        gen = ensure_depth(gen, spec.alpha_max)
    nodes = gen.traj.xs
    if spec.is_power:
        nodes = np.append(nodes[nodes < gen.x1], gen.x1)
    Wn = gen.W(nodes)
    neg = np.nonzero(Wn < 0)[0]
    if neg.size == 0:
        raise DepthError("turning point not bracketed; generate deeper or raise alpha_max")
    j = neg[0]
    lo = nodes[j - 1] if j > 0 else 0.0
    s_star = brentq(lambda s: float(gen.W(s)), lo, nodes[j], xtol=1e-15, rtol=1e-15)
    w_star = float(gen.w(s_star)[0])
    if spec.is_power:
        alpha_star = -w_star / (w_star + 1.0)
    else:
        alpha_star = -w_star
    if alpha_star > spec.alpha_max:
        raise DepthError(f"turning point {alpha_star} exceeds alpha_max")
    return float(alpha_star)


def _alpha_of_lambda(spec, gen, lam, lo, hi):
    f = lambda a: lambda_of_alpha(spec, gen, a) - lam
    return float(brentq(f, lo, hi, xtol=1e-14, rtol=1e-15))


def alpha_on_upper_branch(spec: ProblemSpec, gen: Generator, lam: float,
                          alpha_star: float) -> Optional[float]:
    """The ``alpha > alpha_star`` with ``lambda(alpha) = lam``, or None."""
    lam_star = lambda_of_alpha(spec, gen, alpha_star)
    if not 0 < lam < lam_star:
        return None
    hi = max(2.0 * alpha_star, 1.0)
    while lambda_of_alpha(spec, gen, hi) > lam:
        hi *= 2.0
        if hi > 1e4:
            return None
        gen = ensure_depth(gen, _depth_of(spec, hi))
    return _alpha_of_lambda(spec, gen, lam, alpha_star, hi)


def alpha_on_lower_branch(spec: ProblemSpec, gen: Generator, lam: float,
                          alpha_star: float) -> Optional[float]:
    """The ``alpha < alpha_star`` with ``lambda(alpha) = lam``, or None."""
    lam_star = lambda_of_alpha(spec, gen, alpha_star)
    if not 0 < lam < lam_star:
        return None
    lo = alpha_star * 0.5
    while lambda_of_alpha(spec, gen, lo) > lam:
        lo *= 0.5
        if lo < 1e-300:
            return None
    return _alpha_of_lambda(spec, gen, lam, lo, alpha_star)


@lru_cache(maxsize=16)
def cached_generator(spec: ProblemSpec) -> Generator:
    """Generator for ``spec``, shared between callers (it is immutable)."""
    return generate(spec)


@lru_cache(maxsize=16)
def cached_alpha_star(spec: ProblemSpec) -> float:
    return find_alpha_star(spec, cached_generator(spec))
