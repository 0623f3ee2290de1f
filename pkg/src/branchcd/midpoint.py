"""Piecewise midpoint interpolation and its Jacobian data.

Midpoints are Euclidean on the vertical/diagonal branch, fiber-ratio
interpolated on the gently sloped branch, and ride a correction term on the
steep branch.  Steep pairs in a non-canonical orientation are reduced to the
ascending one by swapping endpooints in x and negating ordinates, and the
result is reflected back; the correction term's ambiguous profile argument
is read as f at the left endpoint (the reading every later use of the
quantity is consistent with), with the literal alternative kept behind
``variant`` for the audit suite.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .backend import kernels
from .errors import DomainError
from .geometry import PairClass, Point, Profile, branch_tag, classify_pair

__all__ = [
    "MidpointResult", "y_tilde", "midpoint", "midpoint_batch",
    "certify_midpoint", "certify_batch", "check_injectivity",
    "injectivity_derivative_bound", "jacobian_of_composition",
]


@dataclass(frozen=True)
class MidpointResult:
    point: Point
    branch: PairClass
    ytilde: float                    # NaN off the steep branch
    jacobian_parts: Optional[Tuple[float, float]] = None


def y_tilde(x0: float, x1: float, y0: float, profile: Profile,
            variant: str = "left") -> float:
    """Steep-branch correction term for the ascending orientation.

    variant "left" evaluates the ambiguous denominator at x0; variant
    "center" is the literal alternative f((x0+x1)/2), retained for
    diagnostics only.
    """
    if not x0 < x1:
        raise DomainError("y_tilde needs x0 < x1")
    xs = np.array([x0, 0.5 * (x0 + x1), x1])
    f0, fm, f1 = profile.f_batch(xs)
    if min(f0, fm, f1) <= 0.0:
        raise DomainError("profile must be positive on the segment")
    den0 = f0 if variant == "left" else fm
    if variant not in ("left", "center"):
        raise DomainError(f"unknown y_tilde variant {variant!r}")
    h = 0.5 * (x1 - x0)
    return 0.5 * (y0 / den0 + (y0 + h) / f1) * fm - y0


def midpoint_batch(x0, y0, x1, y1, profile: Profile):
    """Vectorized midpoint map: (mx, my, branch codes, ytilde)."""
    conv = lambda a: np.ascontiguousarray(a, dtype=np.float64)
    return kernels.midpoint(conv(x0), conv(y0), conv(x1), conv(y1),
                            profile.breaks, profile.c0)


def midpoint(p0: Point, p1: Point, profile: Profile) -> MidpointResult:
    mx, my, br, yt = midpoint_batch(
        np.array([p0[0]]), np.array([p0[1]]),
        np.array([p1[0]]), np.array([p1[1]]), profile)
    if not np.isfinite(mx[0]) or not np.isfinite(my[0]):
        raise DomainError("midpoint undefined (singular profile on the "
                          "segment)")
    return MidpointResult(point=Point(float(mx[0]), float(my[0])),
                          branch=classify_pair(p0, p1),
                          ytilde=float(yt[0]))


def certify_batch(x0, y0, x1, y1, profile: Profile):
    """Deviations |d(M, p_i) - d(p0, p1)/2| for each pair."""
    mx, my, _, _ = midpoint_batch(x0, y0, x1, y1, profile)
    d = np.maximum(np.abs(x1 - x0), np.abs(y1 - y0))
    d0 = np.maximum(np.abs(mx - x0), np.abs(my - y0))
    d1 = np.maximum(np.abs(mx - x1), np.abs(my - y1))
    return np.abs(d0 - 0.5 * d), np.abs(d1 - 0.5 * d)


def certify_midpoint(p0: Point, p1: Point,
                     profile: Profile) -> Tuple[float, float]:
    dev0, dev1 = certify_batch(np.array([p0[0]]), np.array([p0[1]]),
                               np.array([p1[0]]), np.array([p1[1]]), profile)
    return float(dev0[0]), float(dev1[0])


def injectivity_derivative_bound(k: float) -> float:
    """Lower bound on the steep-branch ordinate sensitivity; positivity is
    what rules out collisions."""
    return 0.5 - 3.0 * k - (2.0 * k * k + 3.0 * k) / (1.0 - 2.0 * k) ** 2


def check_injectivity(pairs, profile: Profile,
                      cell_diameter: float = 0.0) -> dict:
    """Collision scan over midpoints of a structured map's support pairs.

    pairs: array of shape (n, 4) rows (x0, y0, x1, y1).  Two distinct pairs
    collide when their midpoints land closer than half a cell diameter.
    """
    pairs = np.asarray(pairs, dtype=np.float64)
    mx, my, _, _ = midpoint_batch(pairs[:, 0], pairs[:, 1],
                                  pairs[:, 2], pairs[:, 3], profile)
    thresh = 0.5 * cell_diameter
    n = mx.shape[0]
    collisions = 0
    closest = np.inf
    order = np.argsort(mx, kind="stable")
    sx, sy = mx[order], my[order]
    for i in range(n):
        j = i + 1
        while j < n and sx[j] - sx[i] <= thresh:
            d = max(sx[j] - sx[i], abs(sy[j] - sy[i]))
            closest = min(closest, d)
            if d < thresh or d == 0.0:     # coincident midpoints always count
                collisions += 1
            j += 1
    return {
        "pairs": int(n),
        "collisions": int(collisions),
        "closest_midpoints": float(closest) if np.isfinite(closest) else None,
        "threshold": float(thresh),
        "derivative_lower_bound":
            injectivity_derivative_bound(profile.params.k),
    }


def jacobian_of_composition(p: Point, t_partials: Tuple[float, float],
                            t_point: Point, branch: PairClass,
                            profile: Profile) -> Tuple[float, float]:
    """Partials (dS1/dx, dS2/dy) of the midpoint-of-transport map at p.

    branch must agree with classify_pair(p, T(p)); it is accepted explicitly
    so callers can pin the branch they certified.
    """
    a, b = t_partials
    ds1, ds2, br, _, _ = kernels.composition_jacobian(
        np.array([p[0]]), np.array([p[1]]),
        np.array([t_point[0]]), np.array([t_point[1]]),
        np.array([float(a)]), np.array([float(b)]),
        profile.breaks, profile.c0)
    if branch_tag(int(br[0])) != branch.tag:
        raise DomainError(
            f"branch mismatch: pair classifies as {branch_tag(int(br[0]))}, "
            f"caller said {branch.tag}")
    if not (np.isfinite(ds1[0]) and np.isfinite(ds2[0])):
        raise DomainError("degenerate branch data")
    return float(ds1[0]), float(ds2[0])
