"""Adaptive Dormand-Prince 5(4) integration with dense output and root location.

Vector fields are numba-compiled callables ``field(x, y, prm) -> dy`` where
``prm`` is any numba-compatible parameter object (an array or a tuple of
arrays).  Plain Python callables passed to :func:`integrate` are compiled on
the fly.  The package's own fields are passed by integer id instead (see
``_kernels``); numba cannot cache a stepper specialized on a function
argument, but it can cache the id-dispatched one.

The interpolant on each accepted step is the cubic Hermite polynomial through
the node states and derivatives plus the DOPRI5 quartic correction
``theta**2 (1 - theta)**2 c``, which vanishes together with its derivative at
both nodes.  It is therefore C^1, reproduces node data exactly, and has the
same order as the local error of the scheme.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from numba import njit, types
from numba.extending import overload
from numba.core.registry import CPUDispatcher

from ._dense import _component_root
from ._kernels import rhs as _builtin_rhs

__all__ = [
    "IntegrationError",
    "Trajectory",
    "EventResult",
    "integrate",
    "evaluate",
    "first_root",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12

# status codes returned by the compiled stepper
_DONE, _STOPPED, _MAXSTEPS, _UNDERFLOW, _NONFINITE = 0, 1, 2, 3, 4

# Dormand-Prince tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_D1, _D3, _D4, _D5, _D6, _D7 = (
    -12715105075 / 11282082432, 87487479700 / 32700410799,
    -10690763975 / 1880347072, 701980252875 / 199316789632,
    -1453857185 / 822651844, 69997945 / 29380423)


class IntegrationError(RuntimeError):
    """Raised when the stepper cannot reach the requested end point."""

    def __init__(self, message: str, x_reached: float):
        super().__init__(f"{message} (last abscissa reached: {x_reached!r})")
        self.x_reached = x_reached


@njit(cache=True, nogil=True)
def _error_norm(err, y, y_new, rtol, atol):
    s = 0.0
    n = y.size
    for i in range(n):
        sk = atol + rtol * max(abs(y[i]), abs(y_new[i]))
        s += (err[i] / sk) ** 2
    return np.sqrt(s / n)


def _eval(field, fid, x, y, prm):
    if field is None:
        return _builtin_rhs(fid, x, y, prm)
    return field(x, y, prm)


@overload(_eval)
def _eval_typed(field, fid, x, y, prm):
    # field is None for the built-in fields, which keeps the stepper cacheable
    if isinstance(field, types.NoneType):
        return lambda field, fid, x, y, prm: _builtin_rhs(fid, x, y, prm)
    return lambda field, fid, x, y, prm: field(x, y, prm)


@njit(cache=True, nogil=True)
def _initial_step(field, fid, x0, y0, f0, x1, rtol, atol, prm):
    # Hairer & Wanner, Solving ODEs I, II.4
    n = y0.size
    sk = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.sum((y0 / sk) ** 2) / n)
    d1 = np.sqrt(np.sum((f0 / sk) ** 2) / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, x1 - x0)
    f1 = _eval(field, fid, x0 + h0, y0 + h0 * f0, prm)
    d2 = np.sqrt(np.sum(((f1 - f0) / sk) ** 2) / n) / h0
    dmax = max(d1, d2)
    if dmax <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dmax) ** 0.2
    return min(100.0 * h0, h1, x1 - x0)


@njit(cache=True, nogil=True)
def _dopri5(field, fid, x0, y0, x1, rtol, atol, prm, stop_idx, stop_level, h_max, max_steps):
    n = y0.size
    cap = 64
    xs = np.empty(cap)
    ys = np.empty((cap, n))
    dys = np.empty((cap, n))
    corr = np.empty((cap, n))

    x = x0
    y = y0.copy()
    k1 = _eval(field, fid, x, y, prm)
    xs[0] = x
    ys[0] = y
    dys[0] = k1
    m = 1
    status = _DONE
    if not np.all(np.isfinite(k1)):
        return xs[:m], ys[:m], dys[:m], corr[:0], _NONFINITE

    h = _initial_step(field, fid, x0, y, k1, x1, rtol, atol, prm)
    if h_max > 0.0:
        h = min(h, h_max)
    facold = 1e-4
    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    safe = 0.9
    rejected = False
    nsteps = 0
    while True:
        if nsteps >= max_steps:
            status = _MAXSTEPS
            break
        last = False
        if x + 1.01 * h >= x1:
            h = x1 - x
            last = True
        if h <= 1e-15 * max(1.0, abs(x)):
            status = _UNDERFLOW
            break
        nsteps += 1
        k2 = _eval(field, fid, x + _C2 * h, y + h * (_A21 * k1), prm)
        k3 = _eval(field, fid, x + _C3 * h, y + h * (_A31 * k1 + _A32 * k2), prm)
        k4 = _eval(field, fid, x + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3), prm)
        k5 = _eval(field, fid, x + _C5 * h,
                   y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4), prm)
        k6 = _eval(field, fid, x + h, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4
                                   + _A65 * k5), prm)
        y_new = y + h * (_A71 * k1 + _A73 * k3 + _A74 * k4 + _A75 * k5 + _A76 * k6)
        x_new = x1 if last else x + h
        k7 = _eval(field, fid, x_new, y_new, prm)
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(k7))):
            # treat as a hard rejection
            h *= 0.25
            rejected = True
            continue
        e = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        err = _error_norm(e, y, y_new, rtol, atol)
        fac11 = err ** expo1 if err > 0.0 else 0.0
        if err <= 1.0:
            fac = fac11 / facold ** beta
            fac = max(0.1, min(5.0, fac / safe))
            h_new = h / fac
            facold = max(err, 1e-4)
            if m >= cap:
                cap *= 2
                xs2 = np.empty(cap)
                ys2 = np.empty((cap, n))
                dys2 = np.empty((cap, n))
                corr2 = np.empty((cap, n))
                xs2[:m] = xs[:m]
                ys2[:m] = ys[:m]
                dys2[:m] = dys[:m]
                corr2[:m - 1] = corr[:m - 1]
                xs, ys, dys, corr = xs2, ys2, dys2, corr2
            corr[m - 1] = h * (_D1 * k1 + _D3 * k3 + _D4 * k4 + _D5 * k5 + _D6 * k6
                               + _D7 * k7)
            xs[m] = x_new
            ys[m] = y_new
            dys[m] = k7
            m += 1
            x = x_new
            y = y_new
            k1 = k7
            if stop_idx >= 0 and y[stop_idx] < stop_level:
                status = _STOPPED
                break
            if last:
                break
            if rejected:
                h_new = min(h_new, h)
            rejected = False
            if h_max > 0.0:
                h_new = min(h_new, h_max)
            h = h_new
        else:
            h = h / min(5.0, fac11 / safe)
            rejected = True
    return xs[:m], ys[:m], dys[:m], corr[:m - 1], status


@dataclass(frozen=True)
class Trajectory:
    """Accepted steps of an integration, with a C^1 dense interpolant.

    ``corr`` holds the per-step quartic correction coefficients; it has one
    row fewer than ``xs``.
    """

    xs: np.ndarray
    ys: np.ndarray
    dys: np.ndarray
    corr: np.ndarray
    tol_used: tuple

    def __post_init__(self):
        for arr in (self.xs, self.ys, self.dys, self.corr):
            arr.setflags(write=False)

    @property
    def t_start(self) -> float:
        return float(self.xs[0])

    @property
    def t_end(self) -> float:
        return float(self.xs[-1])

    @property
    def dim(self) -> int:
        return self.ys.shape[1]

    def __len__(self):
        return self.xs.size

    def __call__(self, x):
        return evaluate(self, x)[0]


@dataclass(frozen=True)
class EventResult:
    location: float
    slope: float


def _as_compiled(field):
    if isinstance(field, (int, np.integer)):
        return None, int(field)
    if isinstance(field, CPUDispatcher):
        return field, -1
    return njit(field), -1


def integrate(
    field: Union[int, Callable],
    x0: float,
    y0,
    x1: float,
    tol: tuple = (DEFAULT_RTOL, DEFAULT_ATOL),
    prm=None,
    *,
    stop_index: int = -1,
    stop_level: float = 0.0,
    h_max: float = 0.0,
    max_steps: int = 200_000,
    breakpoints=(),
) -> Trajectory:
    """Integrate ``y' = field(x, y, prm)`` from ``x0`` to ``x1``.

    If ``stop_index >= 0`` the integration also ends at the first accepted
    step where ``y[stop_index] < stop_level``; the crossing lies inside the
    final step and can be refined with :func:`first_root`.

    ``breakpoints`` inside ``(x0, x1)`` become step boundaries, which keeps
    the error control honest where the field is not smooth.
    """
    rtol, atol = (float(t) for t in tol)
    if not x1 > x0:
        raise ValueError(f"need x1 > x0, got [{x0}, {x1}]")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    if prm is None:
        prm = np.zeros(1)
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    compiled, fid = _as_compiled(field)
    ends = sorted(float(b) for b in breakpoints if x0 < b < x1) + [float(x1)]
    legs, start = [], float(x0)
    for end in ends:
        xs, ys, dys, corr, status = _dopri5(
            compiled, fid, start, y0, end, rtol, atol, prm,
            int(stop_index), float(stop_level), float(h_max), int(max_steps))
        legs.append((xs, ys, dys, corr))
        if status != _DONE or xs[-1] != end:
            break
        start, y0 = end, ys[-1].copy()
    if len(legs) > 1:
        xs = np.concatenate([leg[0][:-1] for leg in legs[:-1]] + [legs[-1][0]])
        ys = np.concatenate([leg[1][:-1] for leg in legs[:-1]] + [legs[-1][1]])
        dys = np.concatenate([leg[2][:-1] for leg in legs[:-1]] + [legs[-1][2]])
        corr = np.concatenate([leg[3] for leg in legs])
    if status == _UNDERFLOW:
        raise IntegrationError("step size underflow", float(xs[-1]))
    if status == _MAXSTEPS:
        raise IntegrationError("maximum number of steps exceeded", float(xs[-1]))
    if status == _NONFINITE:
        raise IntegrationError("non-finite vector field", float(xs[-1]))
    if xs.size < 2:
        raise IntegrationError("no step accepted", float(xs[-1]))
    return Trajectory(xs, ys, dys, corr, (rtol, atol))


def evaluate(traj: Trajectory, x):
    """State and derivative of the interpolant at ``x`` (scalar or array)."""
    xa = np.asarray(x, dtype=np.float64)
    lo, hi = traj.xs[0], traj.xs[-1]
    if np.any(xa < lo) or np.any(xa > hi) or np.any(np.isnan(xa)):
        raise ValueError(f"abscissa outside trajectory range [{lo}, {hi}]")
    flat = xa.ravel()
    i = np.clip(np.searchsorted(traj.xs, flat, side="right") - 1, 0, traj.xs.size - 2)
    h = (traj.xs[i + 1] - traj.xs[i])[:, None]
    t = ((flat - traj.xs[i]) / h[:, 0])[:, None]
    y0 = traj.ys[i]
    d = traj.ys[i + 1] - y0
    a = h * traj.dys[i] - d
    b = d - h * traj.dys[i + 1] - a
    c = traj.corr[i]
    s = 1.0 - t
    inner = b + s * c
    mid = a + t * inner
    val = y0 + t * (d + s * mid)
    dmid = inner - t * c
    dval = (d + s * mid + t * (-mid + s * dmid)) / h
    # exact node reproduction
    at_node = t[:, 0] == 0.0
    val[at_node] = y0[at_node]
    dval[at_node] = traj.dys[i[at_node]]
    at_end = t[:, 0] == 1.0
    val[at_end] = traj.ys[i[at_end] + 1]
    dval[at_end] = traj.dys[i[at_end] + 1]
    shape = xa.shape + (traj.dim,)
    return val.reshape(shape), dval.reshape(shape)


EventFn = Union[int, Callable[[float, np.ndarray], float]]


def _event_value(traj, event, level, x):
    y, dy = evaluate(traj, x)
    if isinstance(event, (int, np.integer)):
        return y[event] - level, dy[event]
    g = event(x, y) - level
    return g, None


def first_root(
    traj: Trajectory,
    event: EventFn,
    window: Optional[tuple] = None,
    level: float = 0.0,
    xtol: float = 1e-13,
) -> Optional[EventResult]:
    """Earliest sign change of an event function along ``traj``.

    ``event`` is either a state component index (the event is
    ``y[event] - level``) or a callable ``event(x, y)``.  Returns ``None``
    when the event does not change sign inside ``window``.
    """
    a, b = (traj.t_start, traj.t_end) if window is None else window
    a = max(a, traj.t_start)
    b = min(b, traj.t_end)
    if not b > a:
        return None
    inside = (traj.xs > a) & (traj.xs < b)
    grid = np.concatenate(([a], traj.xs[inside], [b]))
    if isinstance(event, (int, np.integer)):
        states = evaluate(traj, grid)[0]
        g = states[:, event] - level
    else:
        states = evaluate(traj, grid)[0]
        g = np.array([event(x, y) for x, y in zip(grid, states)]) - level
    if g[0] == 0.0:
        _, slope = _event_value(traj, event, level, grid[0])
        return EventResult(float(grid[0]), _slope(traj, event, level, grid[0], slope))
    change = np.nonzero(np.sign(g[1:]) != np.sign(g[:-1]))[0]
    if change.size == 0:
        return None
    j = change[0]
    lo, hi = grid[j], grid[j + 1]
    g_lo = g[j]
    if isinstance(event, (int, np.integer)) and lo in traj.xs and hi in traj.xs:
        i = int(np.searchsorted(traj.xs, lo))
        x = _component_root(traj.xs, traj.ys, traj.dys, traj.corr, i, int(event),
                            float(level), xtol)
        _, dy = evaluate(traj, x)
        return EventResult(float(x), float(dy[event]))
    if g[j + 1] == 0.0:
        x = hi
    else:
        while hi - lo > xtol * max(1.0, abs(lo)):
            mid = 0.5 * (lo + hi)
            g_mid, _ = _event_value(traj, event, level, mid)
            if g_mid == 0.0:
                lo = hi = mid
                break
            if np.sign(g_mid) == np.sign(g_lo):
                lo, g_lo = mid, g_mid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
        gx, dg = _event_value(traj, event, level, x)
        dg = _slope(traj, event, level, x, dg)
        if dg != 0.0:
            x_newton = x - gx / dg
            if abs(x_newton - x) <= 2 * (hi - lo) + xtol:
                x = x_newton
    _, dg = _event_value(traj, event, level, x)
    return EventResult(float(x), float(_slope(traj, event, level, x, dg)))


def _slope(traj, event, level, x, known):
    if known is not None:
        return known
    h = 1e-7 * max(1.0, abs(x))
    lo = max(traj.t_start, x - h)
    hi = min(traj.t_end, x + h)
    g_hi, _ = _event_value(traj, event, level, hi)
    g_lo, _ = _event_value(traj, event, level, lo)
    return (g_hi - g_lo) / (hi - lo)
