"""Algebraic inequality margins.

Each estimate used by the convexity machinery is exposed as a margin
evaluator: left-hand side minus right-hand side, oriented so a nonnegative
value certifies the inequality at that input.  Scalar wrappers return a
``Margin`` carrying an input echo; ``*_batch`` variants take arrays and feed
the sweep harness.

The log inequality carries the constant C = 32.  The midpoint convexity
estimate is the 1/2-weighted averaged form that uniform convexity of the
log density yields; the matching squared-ratio statement has its own
evaluator.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError
from .geometry import Point, Profile, profile_eval

__all__ = [
    "Margin", "Curve", "line_curve", "interpolation_curve", "blend_curve",
    "log_inequality_margin", "log_inequality_margin_batch",
    "gamma_eval", "gamma_bound_margins", "gamma_bound_margins_batch",
    "convexity_estimate_margin", "k_ratio_convexity_margin",
    "ratio_bound_margin", "ratio_bound_margin_batch",
]

LOG_INEQUALITY_C = 32.0


@dataclass(frozen=True)
class Margin:
    value: float
    context: dict

    @property
    def ok(self) -> bool:
        return self.value >= 0.0


def log_inequality_margin_batch(A, delta):
    """Margin of  log(1 + (1/2 + d)(A - 1)) + C d^2 - (1/2) log A."""
    A = np.asarray(A, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(A <= 0.0):
        raise DomainError("A must be positive")
    if np.any(np.abs(delta) >= 1.0 / 32.0):
        raise DomainError("|delta| must be below 1/32")
    inner = 1.0 + (0.5 + delta) * (A - 1.0)
    if np.any(inner <= 0.0):
        raise DomainError("log argument must stay positive")
    return np.log(inner) + LOG_INEQUALITY_C * delta ** 2 - 0.5 * np.log(A)


def log_inequality_margin(A: float, delta: float) -> Margin:
    value = float(log_inequality_margin_batch(
        np.array([A]), np.array([delta]))[0])
    return Margin(value, {"A": A, "delta": delta})


def _gamma_terms(x0, y0, x1, y1, t, profile: Profile):
    f0 = profile.f_batch(np.asarray(x0, dtype=np.float64))
    f1 = profile.f_batch(np.asarray(x1, dtype=np.float64))
    xt = (1.0 - t) * x0 + t * x1
    ft, ft1, ft2 = profile_eval(profile, xt)
    u0 = y0 / f0
    u1 = y1 / f1
    w = (1.0 - t) * u0 + t * u1
    dx = x1 - x0
    val = w * ft
    d1 = (u1 - u0) * ft + w * ft1 * dx
    d2 = 2.0 * (u1 - u0) * ft1 * dx + w * ft2 * dx * dx
    return val, d1, d2, ft


def gamma_eval(p0: Point, p1: Point, t: float,
               profile: Profile) -> Tuple[float, float, float]:
    """The fiber-ratio interpolation curve between two points, with its
    first and second t-derivatives."""
    x0 = np.array([p0[0]])
    x1 = np.array([p1[0]])
    val, d1, d2, _ = _gamma_terms(x0, np.array([p0[1]]), x1,
                                  np.array([p1[1]]), np.array([t]), profile)
    return float(val[0]), float(d1[0]), float(d2[0])


def gamma_bound_margins_batch(x0, y0, x1, y1, t, profile: Profile):
    """Margins of the two interpolation-curve bounds: slope deviation from
    the chord bounded by 3k, and the curvature bound 2k/f (|slope| + 2)."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(x0 == x1):
        raise DomainError("interpolation bounds need x0 != x1")
    k = profile.params.k
    _, d1, d2, ft = _gamma_terms(x0, y0, x1, y1, t, profile)
    dx = x1 - x0
    slope = (y1 - y0) / dx
    m1 = 3.0 * k - np.abs(d1 / dx - slope)
    m2 = dx * dx * (2.0 * k / ft) * (np.abs(slope) + 2.0) - np.abs(d2)
    return m1, m2


def gamma_bound_margins(p0: Point, p1: Point, t: float,
                        profile: Profile) -> Tuple[Margin, Margin]:
    m1, m2 = gamma_bound_margins_batch(
        np.array([p0[0]]), np.array([p0[1]]), np.array([p1[0]]),
        np.array([p1[1]]), np.array([t]), profile)
    ctx = {"p0": tuple(p0), "p1": tuple(p1), "t": t}
    return Margin(float(m1[0]), ctx), Margin(float(m2[0]), ctx)


@dataclass(frozen=True)
class Curve:
    """Closed-form C^2 test curve y(x) on [x0, x1].

    kind "line": y0 + slope (x - x0).
    kind "interp": the fiber-ratio interpolation through (x0, y0), (x1, y1).
    kind "blend": (1 - lam) * interp-to-(x1, y0 + dx/2) + lam * unit-slope
    line, the curve the steep-branch midpoint rides on.
    """

    x0: float
    x1: float
    y0: float
    kind: str
    slope: float = 0.0     # line
    y1: float = 0.0        # interp
    lam: float = 0.0       # blend

    def eval(self, x, profile: Profile):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "line":
            y = self.y0 + self.slope * (x - self.x0)
            return y, np.full_like(x, self.slope), np.zeros_like(x)
        dx = self.x1 - self.x0
        t = (x - self.x0) / dx
        if self.kind == "interp":
            ytop = self.y1
        elif self.kind == "blend":
            ytop = self.y0 + 0.5 * dx
        else:
            raise DomainError(f"unknown curve kind {self.kind!r}")
        v, d1, d2, _ = _gamma_terms(
            np.full_like(x, self.x0), np.full_like(x, self.y0),
            np.full_like(x, self.x1), np.full_like(x, ytop), t, profile)
        v, d1, d2 = v, d1 / dx, d2 / (dx * dx)
        if self.kind == "blend":
            line = self.y0 + (x - self.x0)
            v = (1.0 - self.lam) * v + self.lam * line
            d1 = (1.0 - self.lam) * d1 + self.lam
            d2 = (1.0 - self.lam) * d2
        return v, d1, d2


def line_curve(x0, x1, y0, slope) -> Curve:
    return Curve(x0=x0, x1=x1, y0=y0, kind="line", slope=slope)


def interpolation_curve(x0, x1, y0, y1) -> Curve:
    return Curve(x0=x0, x1=x1, y0=y0, kind="interp", y1=y1)


def blend_curve(x0, x1, y0, lam) -> Curve:
    return Curve(x0=x0, x1=x1, y0=y0, kind="blend", lam=lam)


def _check_admissible(curve: Curve, H: float, profile: Profile,
                      n_check: int = 33):
    xs = np.linspace(curve.x0, curve.x1, n_check)
    y, d1, d2 = curve.eval(xs, profile)
    f = profile.f_batch(xs)
    if np.any(y < -1e-15) or np.any(y > f + 1e-12):
        raise DomainError("curve leaves the space")
    if np.any(d1 < 0.25 - 1e-12):
        raise DomainError("curve slope drops below 1/4")
    k = profile.params.k
    if np.any(d2 * f > H * k + 1e-12):
        raise DomainError("curve curvature exceeds H k / f")
    return y, f


def _log_density(y, f, K):
    return -np.log(f) - K * (y / f) ** 2


def convexity_estimate_margin(curve: Curve, H: float,
                              profile: Profile) -> Margin:
    """Midpoint log-density gain along an admissible steep curve.

    margin = log m(mid) - (1/2) log m(x0) - (1/2) log m(x1)
             - K (x1 - x0)^2 / (128 f(x1)^2).
    """
    _check_admissible(curve, H, profile)
    K = profile.params.K
    xs = np.array([curve.x0, 0.5 * (curve.x0 + curve.x1), curve.x1])
    y, _, _ = curve.eval(xs, profile)
    f = profile.f_batch(xs)
    lm = _log_density(y, f, K)
    penalty = K * (curve.x1 - curve.x0) ** 2 / (128.0 * f[2] ** 2)
    value = float(lm[1] - 0.5 * lm[0] - 0.5 * lm[2] - penalty)
    return Margin(value, {"x0": curve.x0, "x1": curve.x1, "kind": curve.kind,
                          "H": H})


def k_ratio_convexity_margin(curve: Curve, H: float,
                             profile: Profile) -> Margin:
    """Matching squared-fiber-ratio statement:

    margin = (K/2)(y0/f0)^2 + (K/2)(y1/f1)^2 - K dx^2 / (128 f1^2)
             - K (ymid/fmid)^2.
    """
    _check_admissible(curve, H, profile)
    K = profile.params.K
    xs = np.array([curve.x0, 0.5 * (curve.x0 + curve.x1), curve.x1])
    y, _, _ = curve.eval(xs, profile)
    f = profile.f_batch(xs)
    u = y / f
    penalty = K * (curve.x1 - curve.x0) ** 2 / (128.0 * f[2] ** 2)
    value = float(0.5 * K * u[0] ** 2 + 0.5 * K * u[2] ** 2 - penalty
                  - K * u[1] ** 2)
    return Margin(value, {"x0": curve.x0, "x1": curve.x1, "kind": curve.kind,
                          "H": H})


def curve_margins_batch(curves, H: float, profile: Profile):
    """Both midpoint margins for a list of curves (lemma and corollary)."""
    m_log = np.empty(len(curves))
    m_sq = np.empty(len(curves))
    for i, c in enumerate(curves):
        m_log[i] = convexity_estimate_margin(c, H, profile).value
        m_sq[i] = k_ratio_convexity_margin(c, H, profile).value
    return m_log, m_sq


def convexity_margins_vectorized(x0, x1, y0, is_line, slope, lam,
                                 profile: Profile):
    """Vectorized midpoint margins for the two shipped curve families.

    is_line selects line curves (given slope) versus blend curves (given
    lam); admissibility is the sampler's responsibility here, the in-space
    constraint is still asserted.  Matches the scalar evaluators exactly on
    shared inputs.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    slope = np.asarray(slope, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    dx = x1 - x0
    xm = 0.5 * (x0 + x1)
    f0 = profile.f_batch(x0)
    fm = profile.f_batch(xm)
    f1 = profile.f_batch(x1)

    y_line_m = y0 + slope * 0.5 * dx
    y_line_1 = y0 + slope * dx
    u0 = y0 / f0
    u1 = (y0 + 0.5 * dx) / f1
    interp_m = 0.5 * (u0 + u1) * fm
    y_blend_m = (1.0 - lam) * interp_m + lam * (y0 + 0.5 * dx)
    y_blend_1 = (1.0 - lam) * (y0 + 0.5 * dx) + lam * (y0 + dx)

    ym = np.where(is_line, y_line_m, y_blend_m)
    y1 = np.where(is_line, y_line_1, y_blend_1)
    if (np.any(y0 < -1e-15) or np.any(y0 > f0 + 1e-12)
            or np.any(ym > fm + 1e-12) or np.any(y1 > f1 + 1e-12)):
        raise DomainError("curve leaves the space")

    K = profile.params.K
    lm0 = _log_density(y0, f0, K)
    lmm = _log_density(ym, fm, K)
    lm1 = _log_density(y1, f1, K)
    penalty = K * dx * dx / (128.0 * f1 * f1)
    m_log = lmm - 0.5 * lm0 - 0.5 * lm1 - penalty
    m_sq = (0.5 * K * (y0 / f0) ** 2 + 0.5 * K * (y1 / f1) ** 2
            - penalty - K * (ym / fm) ** 2)
    return m_log, m_sq


def ratio_bound_margin_batch(x, delta, profile: Profile):
    """Margin of the symmetric profile-ratio estimate

    |f(x)/f(x-d) + f(x)/f(x+d) - 2| <= [2k^2 + f(x)] d^2 / (f(x-d) f(x+d)).
    """
    x = np.asarray(x, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta <= 0.0):
        raise DomainError("delta must be positive")
    if np.any(x - delta < -1.0) or np.any(x + delta > 1.0):
        raise DomainError("x +- delta must stay inside [-1, 1]")
    k = profile.params.k
    fx = profile.f_batch(x)
    fl = profile.f_batch(x - delta)
    fr = profile.f_batch(x + delta)
    if np.any(fl <= 0.0) or np.any(fr <= 0.0):
        raise DomainError("profile must be positive at x +- delta")
    deviation = np.abs(fx / fl + fx / fr - 2.0)
    bound = (2.0 * k * k + fx) * delta * delta / (fl * fr)
    return bound - deviation


def ratio_bound_margin(x: float, delta: float, profile: Profile) -> Margin:
    value = float(ratio_bound_margin_batch(np.array([x]),
                                           np.array([delta]), profile)[0])
    return Margin(value, {"x": x, "delta": delta})
