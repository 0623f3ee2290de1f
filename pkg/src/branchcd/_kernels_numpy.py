"""Pure-numpy implementations of the hot kernels.

Every function here has a numba twin in ``_kernels_numba`` with the same
signature and semantics; ``backend`` picks one of the two modules at import
time.  All inputs are 1-D float64 arrays unless noted; profile data comes in
as the breakpoint vector ``breaks = [-1, -k, k, 1]`` plus per-piece
ascending-power coefficient rows (3 pieces, degree <= 4).

Branch codes used throughout: 0 = V, 1 = D, 2 = H0, 3 = H1.
"""

import numpy as np

BACKEND_NAME = "numpy"


def _pieces(x, breaks):
    # piece 0: x < -k, piece 1: -k <= x < k, piece 2: x >= k
    return np.searchsorted(breaks[1:3], x, side="right")


def _horner(x, rows):
    acc = rows[:, 4].copy()
    for d in (3, 2, 1, 0):
        acc = acc * x + rows[:, d]
    return acc


def eval_f(x, breaks, c0):
    """Profile value f at each x."""
    p = _pieces(x, breaks)
    return _horner(x, c0[p])


def eval_profile(x, breaks, c0, c1, c2):
    """Profile value and first two derivatives at each x."""
    p = _pieces(x, breaks)
    return _horner(x, c0[p]), _horner(x, c1[p]), _horner(x, c2[p])


def classify(x0, y0, x1, y1):
    """Branch code per pair."""
    dx = np.abs(x1 - x0)
    dy = np.abs(y1 - y0)
    out = np.empty(dx.shape, dtype=np.int64)
    out[dx < dy] = 0
    out[dx == dy] = 1
    h = dx > dy
    out[h & (2.0 * dy <= dx)] = 2
    out[h & (2.0 * dy > dx)] = 3
    return out


def midpoint(x0, y0, x1, y1, breaks, c0):
    """Piecewise midpoint map.

    Returns (mx, my, branch, ytilde); ytilde is NaN off the H1 branch.
    H1 pairs are reduced to the ascending orientation by swapping the
    endpoints (x) and negating both ordinates (y), and the result is
    reflected back.
    """
    dx = np.abs(x1 - x0)
    dy = np.abs(y1 - y0)
    br = classify(x0, y0, x1, y1)
    mx = 0.5 * (x0 + x1)
    my = 0.5 * (y0 + y1)
    yt = np.full(x0.shape, np.nan)

    hmask = br >= 2
    if np.any(hmask):
        a0 = np.where(x0 <= x1, x0, x1)
        a1 = np.where(x0 <= x1, x1, x0)
        b0 = np.where(x0 <= x1, y0, y1)
        b1 = np.where(x0 <= x1, y1, y0)
        f0 = eval_f(a0, breaks, c0)
        f1 = eval_f(a1, breaks, c0)
        fm = eval_f(mx, breaks, c0)

        m0 = hmask & (br == 2)
        my = np.where(m0, 0.5 * (b0 / np.where(m0, f0, 1.0)
                                 + b1 / np.where(m0, f1, 1.0)) * fm, my)

        m1 = hmask & (br == 3)
        if np.any(m1):
            s = np.where(b1 >= b0, 1.0, -1.0)
            yy0 = s * b0
            yy1 = s * b1
            h = 0.5 * (a1 - a0)
            safe0 = np.where(m1, f0, 1.0)
            safe1 = np.where(m1, f1, 1.0)
            ytc = 0.5 * (yy0 / safe0 + (yy0 + h) / safe1) * fm - yy0
            lam = np.where(m1, (yy1 - yy0) / np.where(m1, h, 1.0) - 1.0, 0.0)
            myc = yy0 + ytc + (h - ytc) * lam
            my = np.where(m1, s * myc, my)
            yt = np.where(m1, ytc, yt)
    return mx, my, br, yt


def composition_jacobian(x, y, t1, t2, a, b, breaks, c0):
    """Midpoint-of-transport partials (dS1/dx, dS2/dy) per atom.

    (x, y) is the source, (t1, t2) = T(x, y), a = dT1/dx, b = dT2/dy.
    Also returns the branch code and the midpoint itself.
    """
    mx, my, br, yt = midpoint(x, y, t1, t2, breaks, c0)
    ds1 = 0.5 * (1.0 + a)
    ds2 = 0.5 * (1.0 + b)

    m0 = br == 2
    if np.any(m0):
        fx = eval_f(x, breaks, c0)
        ft = eval_f(t1, breaks, c0)
        fm = eval_f(mx, breaks, c0)
        ds2 = np.where(m0, 0.5 * (1.0 / np.where(m0, fx, 1.0)
                                  + b / np.where(m0, ft, 1.0)) * fm, ds2)

    m1 = br == 3
    if np.any(m1):
        src_first = x <= t1
        a0 = np.where(src_first, x, t1)
        a1 = np.where(src_first, t1, x)
        b0 = np.where(src_first, y, t2)
        b1 = np.where(src_first, t2, y)
        s = np.where(b1 >= b0, 1.0, -1.0)
        yy0 = s * b0
        h = 0.5 * (a1 - a0)
        hs = np.where(m1, h, 1.0)
        f0 = np.where(m1, eval_f(a0, breaks, c0), 1.0)
        f1 = np.where(m1, eval_f(a1, breaks, c0), 1.0)
        fm = eval_f(mx, breaks, c0)
        ytc = 0.5 * (yy0 / f0 + (yy0 + h) / f1) * fm - yy0
        lam = (s * b1 - yy0) / hs - 1.0
        q = 0.5 * (fm / f0 + fm / f1) - 1.0
        d_dy0 = q * (1.0 - lam) + ytc / hs
        d_dy1 = 1.0 - ytc / hs
        ds2_h1 = np.where(src_first, d_dy0 + b * d_dy1, d_dy1 + b * d_dy0)
        ds2 = np.where(m1, ds2_h1, ds2)
    return ds1, ds2, br, mx, my


def jacobi_condition(x, y, t1, t2, a, b, kappa, breaks, c0):
    """Pointwise entropy-convexity condition at each transport sample.

    Returns (lhs, rhs, branch, mx, my) where the condition holds iff
    lhs >= rhs; kappa is the Gaussian weight constant of the reference
    density.
    """
    ds1, ds2, br, mx, my = composition_jacobian(x, y, t1, t2, a, b, breaks, c0)
    fx = eval_f(x, breaks, c0)
    ft = eval_f(t1, breaks, c0)
    fm = eval_f(mx, breaks, c0)
    log_m_src = -np.log(fx) - kappa * (y / fx) ** 2
    log_m_tgt = -np.log(ft) - kappa * (t2 / ft) ** 2
    log_m_mid = -np.log(fm) - kappa * (my / fm) ** 2
    lhs = log_m_mid + np.log(ds1) + np.log(ds2)
    rhs = 0.5 * (log_m_tgt + np.log(a) + np.log(b)) + 0.5 * log_m_src
    return lhs, rhs, br, mx, my


def mgh_distortion(xa, ya, xb, yb, eps, breaks, c0):
    """Distortion of the vertical-collapse map on each sampled pair.

    The map sends (x, y) on the eps-space to (x, y * f0 / feps) on the
    limit space, where f0 = feps - eps.  Returns
    |d(map pa, map pb) - d(pa, pb)|.
    """
    fa = eval_f(xa, breaks, c0)
    fb = eval_f(xb, breaks, c0)
    ya2 = ya * (fa - eps) / fa
    yb2 = yb * (fb - eps) / fb
    d = np.maximum(np.abs(xa - xb), np.abs(ya - yb))
    d2 = np.maximum(np.abs(xa - xb), np.abs(ya2 - yb2))
    return np.abs(d2 - d)
