"""Numba implementations of the hot kernels.

Same signatures and semantics as ``_kernels_numpy``; see that module for the
conventions.  Kept as explicit scalar loops so the JIT fuses profile lookups
with the surrounding arithmetic.
"""

import numpy as np
from numba import njit

BACKEND_NAME = "numba"

_JIT = dict(cache=True, fastmath=False)


@njit(**_JIT)
def _piece(x, breaks):
    if x < breaks[1]:
        return 0
    if x < breaks[2]:
        return 1
    return 2


@njit(**_JIT)
def _horner1(x, c, p):
    acc = c[p, 4]
    acc = acc * x + c[p, 3]
    acc = acc * x + c[p, 2]
    acc = acc * x + c[p, 1]
    acc = acc * x + c[p, 0]
    return acc


@njit(**_JIT)
def _f1(x, breaks, c0):
    return _horner1(x, c0, _piece(x, breaks))


@njit(**_JIT)
def eval_f(x, breaks, c0):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _f1(x[i], breaks, c0)
    return out


@njit(**_JIT)
def eval_profile(x, breaks, c0, c1, c2):
    n = x.shape[0]
    f = np.empty(n)
    f1 = np.empty(n)
    f2 = np.empty(n)
    for i in range(n):
        p = _piece(x[i], breaks)
        f[i] = _horner1(x[i], c0, p)
        f1[i] = _horner1(x[i], c1, p)
        f2[i] = _horner1(x[i], c2, p)
    return f, f1, f2


@njit(**_JIT)
def _classify1(x0, y0, x1, y1):
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    if dx < dy:
        return 0
    if dx == dy:
        return 1
    if 2.0 * dy <= dx:
        return 2
    return 3


@njit(**_JIT)
def classify(x0, y0, x1, y1):
    n = x0.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _classify1(x0[i], y0[i], x1[i], y1[i])
    return out


@njit(**_JIT)
def _midpoint1(x0, y0, x1, y1, breaks, c0):
    br = _classify1(x0, y0, x1, y1)
    mx = 0.5 * (x0 + x1)
    yt = np.nan
    if br <= 1:
        return mx, 0.5 * (y0 + y1), br, yt
    if x0 <= x1:
        a0, a1, b0, b1 = x0, x1, y0, y1
    else:
        a0, a1, b0, b1 = x1, x0, y1, y0
    f0 = _f1(a0, breaks, c0)
    f1 = _f1(a1, breaks, c0)
    fm = _f1(mx, breaks, c0)
    if br == 2:
        return mx, 0.5 * (b0 / f0 + b1 / f1) * fm, br, yt
    s = 1.0 if b1 >= b0 else -1.0
    yy0 = s * b0
    yy1 = s * b1
    h = 0.5 * (a1 - a0)
    yt = 0.5 * (yy0 / f0 + (yy0 + h) / f1) * fm - yy0
    lam = (yy1 - yy0) / h - 1.0
    my = s * (yy0 + yt + (h - yt) * lam)
    return mx, my, br, yt


@njit(**_JIT)
def midpoint(x0, y0, x1, y1, breaks, c0):
    n = x0.shape[0]
    mx = np.empty(n)
    my = np.empty(n)
    br = np.empty(n, dtype=np.int64)
    yt = np.empty(n)
    for i in range(n):
        mx[i], my[i], br[i], yt[i] = _midpoint1(x0[i], y0[i], x1[i], y1[i],
                                                breaks, c0)
    return mx, my, br, yt


@njit(**_JIT)
def _composition_jacobian1(x, y, t1, t2, a, b, breaks, c0):
    mx, my, br, yt = _midpoint1(x, y, t1, t2, breaks, c0)
    ds1 = 0.5 * (1.0 + a)
    if br <= 1:
        return ds1, 0.5 * (1.0 + b), br, mx, my
    if br == 2:
        fx = _f1(x, breaks, c0)
        ft = _f1(t1, breaks, c0)
        fm = _f1(mx, breaks, c0)
        return ds1, 0.5 * (1.0 / fx + b / ft) * fm, br, mx, my
    src_first = x <= t1
    if src_first:
        a0, a1, b0, b1 = x, t1, y, t2
    else:
        a0, a1, b0, b1 = t1, x, t2, y
    s = 1.0 if b1 >= b0 else -1.0
    yy0 = s * b0
    h = 0.5 * (a1 - a0)
    f0 = _f1(a0, breaks, c0)
    f1 = _f1(a1, breaks, c0)
    fm = _f1(mx, breaks, c0)
    ytc = 0.5 * (yy0 / f0 + (yy0 + h) / f1) * fm - yy0
    lam = (s * b1 - yy0) / h - 1.0
    q = 0.5 * (fm / f0 + fm / f1) - 1.0
    d_dy0 = q * (1.0 - lam) + ytc / h
    d_dy1 = 1.0 - ytc / h
    if src_first:
        ds2 = d_dy0 + b * d_dy1
    else:
        ds2 = d_dy1 + b * d_dy0
    return ds1, ds2, br, mx, my


@njit(**_JIT)
def composition_jacobian(x, y, t1, t2, a, b, breaks, c0):
    n = x.shape[0]
    ds1 = np.empty(n)
    ds2 = np.empty(n)
    br = np.empty(n, dtype=np.int64)
    mx = np.empty(n)
    my = np.empty(n)
    for i in range(n):
        ds1[i], ds2[i], br[i], mx[i], my[i] = _composition_jacobian1(
            x[i], y[i], t1[i], t2[i], a[i], b[i], breaks, c0)
    return ds1, ds2, br, mx, my


@njit(**_JIT)
def jacobi_condition(x, y, t1, t2, a, b, kappa, breaks, c0):
    n = x.shape[0]
    lhs = np.empty(n)
    rhs = np.empty(n)
    br = np.empty(n, dtype=np.int64)
    mx = np.empty(n)
    my = np.empty(n)
    for i in range(n):
        ds1, ds2, bri, mxi, myi = _composition_jacobian1(
            x[i], y[i], t1[i], t2[i], a[i], b[i], breaks, c0)
        fx = _f1(x[i], breaks, c0)
        ft = _f1(t1[i], breaks, c0)
        fm = _f1(mxi, breaks, c0)
        log_m_src = -np.log(fx) - kappa * (y[i] / fx) ** 2
        log_m_tgt = -np.log(ft) - kappa * (t2[i] / ft) ** 2
        log_m_mid = -np.log(fm) - kappa * (myi / fm) ** 2
        lhs[i] = log_m_mid + np.log(ds1) + np.log(ds2)
        rhs[i] = 0.5 * (log_m_tgt + np.log(a[i]) + np.log(b[i])) \
            + 0.5 * log_m_src
        br[i] = bri
        mx[i] = mxi
        my[i] = myi
    return lhs, rhs, br, mx, my


@njit(**_JIT)
def mgh_distortion(xa, ya, xb, yb, eps, breaks, c0):
    n = xa.shape[0]
    out = np.empty(n)
    for i in range(n):
        fa = _f1(xa[i], breaks, c0)
        fb = _f1(xb[i], breaks, c0)
        ya2 = ya[i] * (fa - eps) / fa
        yb2 = yb[i] * (fb - eps) / fb
        d = max(abs(xa[i] - xb[i]), abs(ya[i] - yb[i]))
        d2 = max(abs(xa[i] - xb[i]), abs(ya2 - yb2))
        out[i] = abs(d2 - d)
    return out
