"""Compiled evaluation of the piecewise dense interpolant."""
from numba import njit


@njit(cache=True, nogil=True)
def _locate(xs, x):
    # index i with xs[i] <= x <= xs[i+1], clamped to a valid step
    n = xs.size
    if x <= xs[0]:
        return 0
    if x >= xs[n - 1]:
        return n - 2
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def _interp_component(xs, ys, dys, corr, x, j):
    """Value and derivative of component ``j`` of the dense interpolant."""
    i = _locate(xs, x)
    h = xs[i + 1] - xs[i]
    t = (x - xs[i]) / h
    y0 = ys[i, j]
    d = ys[i + 1, j] - y0
    a = h * dys[i, j] - d
    b = d - h * dys[i + 1, j] - a
    c = corr[i, j]
    # y0 + t*(d + (1-t)*(a + t*(b + (1-t)*c)))
    s = 1.0 - t
    inner = b + s * c
    mid = a + t * inner
    val = y0 + t * (d + s * mid)
    dinner = -c
    dmid = inner + t * dinner
    dval = d + s * mid + t * (-mid + s * dmid)
    return val, dval / h


@njit(cache=True, nogil=True)
def _component_root(xs, ys, dys, corr, i, j, level, xtol):
    """Root of ``y_j - level`` on step ``i``: bisection, then one Newton step."""
    lo = xs[i]
    hi = xs[i + 1]
    g_lo = ys[i, j] - level
    if ys[i + 1, j] - level == 0.0:
        return hi
    while hi - lo > xtol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        g_mid, _ = _interp_component(xs, ys, dys, corr, mid, j)
        g_mid -= level
        if g_mid == 0.0:
            return mid
        if (g_mid > 0.0) == (g_lo > 0.0):
            lo = mid
            g_lo = g_mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    g, dg = _interp_component(xs, ys, dys, corr, x, j)
    g -= level
    if dg != 0.0:
        x_new = x - g / dg
        if abs(x_new - x) <= 2.0 * (hi - lo) + xtol:
            x = x_new
    return x
