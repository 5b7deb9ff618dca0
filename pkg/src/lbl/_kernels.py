"""Compiled vector fields of the package, dispatched by integer id.

Every built-in field takes ``prm = (pp, xs, ys, dys, corr)``: a parameter
vector followed by the arrays of a generator trajectory (dummies when unused).
"""
import math

import numpy as np
from numba import njit

from ._dense import _interp_component

KIND_EXP = 0  # same code as problem.KIND_EXP (importing it here would be circular)

FIELD_GENERATOR, FIELD_PRUEFER, FIELD_LINEAR, FIELD_SHOT = 0, 1, 2, 3

NO_TRAJ = (np.zeros(2), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((1, 2)))


def pack(pp, arrays=NO_TRAJ) -> tuple:
    return (np.ascontiguousarray(pp, dtype=np.float64), *arrays)


@njit(cache=True, nogil=True)
def _f(w, kind, p):
    if kind == KIND_EXP:
        return math.exp(w)
    b = w + 1.0
    return b ** p if b > 0.0 else 0.0


@njit(cache=True, nogil=True)
def _df(w, kind, p):
    if kind == KIND_EXP:
        return math.exp(w)
    b = w + 1.0
    return p * b ** (p - 1.0) if b > 0.0 else 0.0


@njit(cache=True, nogil=True)
def _series(s, l, a, b):
    """Two-term expansion of w and w' near the origin."""
    sl2 = s ** (l + 2.0)
    s2l4 = sl2 * sl2
    w = -a * sl2 + b * s2l4
    dw = -a * (l + 2.0) * sl2 / s + b * (2.0 * l + 4.0) * s2l4 / s if s > 0.0 else 0.0
    return w, dw


@njit(cache=True, nogil=True)
def generator_w(s, gp, xs, ys, dys, corr):
    """w(s) and w'(s) for s >= 0.  ``gp = [l, kind, p, x_seed, a, b]``."""
    if s < gp[3]:
        return _series(s, gp[0], gp[4], gp[5])
    w, _ = _interp_component(xs, ys, dys, corr, s, 0)
    dw, _ = _interp_component(xs, ys, dys, corr, s, 1)
    return w, dw


@njit(cache=True, nogil=True)
def _q(x, pp, xs, ys, dys, corr):
    # pp = [mode, const, scale, l, kind, p, x_seed, a, b, mu]
    if pp[0] == 0.0:
        return pp[1]
    s = pp[2] * abs(x)
    w, _ = generator_w(s, pp[3:9], xs, ys, dys, corr)
    return pp[2] * pp[2] * s ** pp[3] * _df(w, int(pp[4]), pp[5])


@njit(cache=True, nogil=True)
def _q_vec(x, pp, xs, ys, dys, corr):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = _q(x[i], pp, xs, ys, dys, corr)
    return out


@njit(cache=True, nogil=True)
def _generator_field(x, y, pp):
    # w'' = -x^l f(w); pp = [l, kind, p]
    out = np.empty(2)
    out[0] = y[1]
    out[1] = -abs(x) ** pp[0] * _f(y[0], int(pp[1]), pp[2])
    return out


@njit(cache=True, nogil=True)
def _pruefer_field(x, y, pp, xs, ys, dys, corr):
    # angle theta and its derivative in mu
    Q = _q(x, pp, xs, ys, dys, corr) + pp[9]
    s = math.sin(y[0])
    c = math.cos(y[0])
    out = np.empty(2)
    out[0] = c * c + Q * s * s
    out[1] = (Q - 1.0) * 2.0 * s * c * y[1] + s * s
    return out


@njit(cache=True, nogil=True)
def _linear_field(x, y, pp, xs, ys, dys, corr):
    out = np.empty(2)
    out[0] = y[1]
    out[1] = -(_q(x, pp, xs, ys, dys, corr) + pp[9]) * y[0]
    return out


@njit(cache=True, nogil=True)
def _shot_field(x, y, pp):
    # (u, u') and optionally the variation (v, v'); pp = [lam, l, kind, p]
    h = pp[0] * abs(x) ** pp[1]
    kind, p = int(pp[2]), pp[3]
    out = np.empty_like(y)
    out[0] = y[1]
    out[1] = -h * _f(y[0], kind, p)
    if y.size == 4:
        out[2] = y[3]
        out[3] = -h * _df(y[0], kind, p) * y[2]
    return out


@njit(cache=True, nogil=True)
def rhs(fid, x, y, prm):
    pp, xs, ys, dys, corr = prm
    if fid == FIELD_GENERATOR:
        return _generator_field(x, y, pp)
    if fid == FIELD_PRUEFER:
        return _pruefer_field(x, y, pp, xs, ys, dys, corr)
    if fid == FIELD_LINEAR:
        return _linear_field(x, y, pp, xs, ys, dys, corr)
    return _shot_field(x, y, pp)
