"""Entropy convexity checks: the pointwise Jacobi-equation condition, the
midpoint entropy gap, weighted variants, and dyadic geodesic families.

Entropies of pushforward measures are computed through the Jacobian chain
(density at the image = density at the source * m_src / (m_image * J))
rather than by re-binning, which removes one discretization error source;
measure-level re-binning survives as a low-resolution cross-check in the
test suite.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .backend import kernels
from .errors import DomainError
from .geometry import Point, Profile, branch_tag
from .measures import DiscreteMeasure
from .midpoint import check_injectivity
from .transport import TransportMap

__all__ = [
    "ConditionSample", "GeodesicFamily", "jacobi_condition_margin",
    "jacobi_sweep", "calibrate_K", "midpoint_entropy_gap",
    "weighted_entropy_gap", "build_dyadic_geodesic", "k_convexity_report",
]


@dataclass(frozen=True)
class ConditionSample:
    point: Point
    t_point: Point
    branch: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def _log_ref_density(x, y, profile: Profile):
    f = profile.f_batch(np.asarray(x, dtype=np.float64))
    return -np.log(f) - profile.params.K * (np.asarray(y) / f) ** 2


def jacobi_sweep(tmap: TransportMap, profile: Profile,
                 kappa: Optional[float] = None) -> dict:
    """Pointwise condition over every atom of a transport map.

    kappa overrides the Gaussian constant of the reference density (used by
    the calibration search); defaults to the profile's K.
    """
    if kappa is None:
        kappa = profile.params.K
    a = tmap.dt1_dx
    b = tmap.dt2_dy
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise DomainError("nonpositive transport partial; singular "
                          "configuration")
    mu = tmap.source
    lhs, rhs, br, mx, my = kernels.jacobi_condition(
        mu.x, mu.y, tmap.t1, tmap.t2,
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        float(kappa), profile.breaks, profile.c0)
    return {
        "x": mu.x, "y": mu.y, "branch": br,
        "lhs": lhs, "rhs": rhs, "margin": lhs - rhs,
        "mid_x": mx, "mid_y": my,
    }


def jacobi_condition_margin(p: Point, t_point: Point, t_partials,
                            profile: Profile) -> ConditionSample:
    """Single-sample version of the pointwise condition."""
    a, b = t_partials
    if not (a > 0.0 and b > 0.0):
        raise DomainError("nonpositive transport partial; singular "
                          "configuration")
    lhs, rhs, br, _, _ = kernels.jacobi_condition(
        np.array([p[0]]), np.array([p[1]]),
        np.array([t_point[0]]), np.array([t_point[1]]),
        np.array([float(a)]), np.array([float(b)]),
        float(profile.params.K), profile.breaks, profile.c0)
    return ConditionSample(point=Point(*p), t_point=Point(*t_point),
                           branch=branch_tag(int(br[0])),
                           lhs=float(lhs[0]), rhs=float(rhs[0]))


def calibrate_K(sweep_min_margin: Callable[[float], float],
                lo: float = 1.0, hi: float = 1e4,
                rel_tol: float = 1e-3) -> dict:
    """Binary search for the smallest K with nonnegative sweep margins.

    sweep_min_margin(K) must be nondecreasing in K (it is for the shipped
    transport families).  Returns the certified-passing K and the search
    trace.
    """
    trace = []

    def ok(K):
        m = sweep_min_margin(K)
        trace.append((K, m))
        return m >= 0.0

    if ok(lo):
        return {"K": lo, "trace": trace, "converged": True}
    if not ok(hi):
        return {"K": hi, "trace": trace, "converged": False}
    a, b_ = lo, hi
    while (b_ - a) > rel_tol * b_:
        mid = 0.5 * (a + b_)
        if ok(mid):
            b_ = mid
        else:
            a = mid
    return {"K": b_, "trace": trace, "converged": True}


def _log_rho(mu: DiscreteMeasure) -> np.ndarray:
    """log(w / cell_mass), zero on uncharged atoms (their w log w -> 0)."""
    charged = mu.w > 0.0
    if np.any(mu.cell_mass[charged] <= 0.0):
        raise DomainError("charged atom with zero reference mass")
    out = np.zeros(len(mu))
    out[charged] = np.log(mu.w[charged] / mu.cell_mass[charged])
    return out


def _entropy_from_logrho(w, logrho, f=None) -> float:
    fw = w if f is None else w * f
    mask = fw > 0.0
    if f is None:
        return float(np.sum(fw[mask] * logrho[mask]))
    return float(np.sum(fw[mask] * (logrho[mask] + np.log(f[mask]))))


def _collision_guard(tmap: TransportMap, profile: Profile,
                     limit: float) -> None:
    """Distinct support pairs must keep distinct midpoints.

    The collision scale is the inscribed-cell size of the midpoint grid
    (cells are thin in y), so legitimately distinct fiber neighbors do not
    alarm.
    """
    mu = tmap.source
    pairs = np.column_stack([mu.x, mu.y, tmap.t1, tmap.t2])
    scale = mu.dx if mu.dx else 0.0
    if mu.ny:
        fmid = profile.f_batch(0.5 * (mu.x + tmap.t1))
        scale = min(scale, float(fmid.min()) / mu.ny)
    rep = check_injectivity(pairs, profile, cell_diameter=scale)
    frac = rep["collisions"] / max(rep["pairs"], 1)
    if frac > limit:
        raise DomainError(f"midpoint collisions on {frac:.3f} of support "
                          f"pairs (> {limit}); injectivity failure")


def transport_log_chain(tmap: TransportMap, profile: Profile):
    """log density increments along T and along the midpoint composition.

    Returns (logrho0, logrho_T, logrho_M): the log m-relative densities of
    mu0, T_# mu0 (at the image atoms) and [M o (id, T)]_# mu0 (at the
    midpoint atoms).
    """
    mu = tmap.source
    logrho0 = _log_rho(mu)
    a = np.ascontiguousarray(tmap.dt1_dx, dtype=np.float64)
    b = np.ascontiguousarray(tmap.dt2_dy, dtype=np.float64)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise DomainError("nonpositive transport partial")
    ds1, ds2, _, mx, my = kernels.composition_jacobian(
        mu.x, mu.y, tmap.t1, tmap.t2, a, b, profile.breaks, profile.c0)
    lm0 = _log_ref_density(mu.x, mu.y, profile)
    lmT = _log_ref_density(tmap.t1, tmap.t2, profile)
    lmM = _log_ref_density(mx, my, profile)
    logrho_T = logrho0 + lm0 - lmT - np.log(a) - np.log(b)
    logrho_M = logrho0 + lm0 - lmM - np.log(ds1) - np.log(ds2)
    return logrho0, logrho_T, logrho_M


def midpoint_entropy_gap(mu0: DiscreteMeasure, tmap: TransportMap,
                         profile: Profile,
                         collision_limit: float = 0.01) -> float:
    """Ent(midpoint pushforward) - mean of the endpoint entropies."""
    return weighted_entropy_gap(mu0, tmap, None, profile,
                                collision_limit=collision_limit)


def weighted_entropy_gap(mu0: DiscreteMeasure, tmap: TransportMap,
                         weighting: Optional[np.ndarray], profile: Profile,
                         collision_limit: float = 0.01) -> float:
    """Entropy gap for the reweighted triple (f mu0, midpoint, T_#(f mu0)).

    weighting None means f = 1.  f must be nonnegative with sum(f w) = 1.
    """
    if tmap.source is not mu0:
        raise DomainError("map must be built on mu0")
    if weighting is not None:
        weighting = np.asarray(weighting, dtype=np.float64)
        if np.any(weighting < 0.0):
            raise DomainError("weighting must be nonnegative")
        if abs(float(np.sum(weighting * mu0.w)) - 1.0) > 1e-9:
            raise DomainError("weighting must integrate to 1 against mu0")
    _collision_guard(tmap, profile, collision_limit)
    logrho0, logrho_T, logrho_M = transport_log_chain(tmap, profile)
    ent0 = _entropy_from_logrho(mu0.w, logrho0, weighting)
    ent1 = _entropy_from_logrho(mu0.w, logrho_T, weighting)
    entm = _entropy_from_logrho(mu0.w, logrho_M, weighting)
    return entm - 0.5 * ent0 - 0.5 * ent1


@dataclass
class GeodesicFamily:
    """Per-source dyadic paths with tracked log densities.

    points has shape (n_atoms, n_times, 2) and logrho (n_atoms, n_times);
    weights are the source weights, weighting an optional reweighting
    factor per atom (sum weighting * weights = 1).
    """

    depth: int
    times: np.ndarray
    points: np.ndarray
    logrho: np.ndarray
    weights: np.ndarray
    w2_squared: float
    weighting: Optional[np.ndarray] = None
    eps_tag: float = 0.0

    @property
    def n_times(self) -> int:
        return self.times.shape[0]

    def entropies(self) -> np.ndarray:
        out = np.empty(self.n_times)
        for j in range(self.n_times):
            out[j] = _entropy_from_logrho(self.weights, self.logrho[:, j],
                                          self.weighting)
        return out

    def speeds(self) -> np.ndarray:
        """d_inf between consecutive path points, per atom and interval."""
        d = np.maximum(np.abs(np.diff(self.points[:, :, 0], axis=1)),
                       np.abs(np.diff(self.points[:, :, 1], axis=1)))
        return d


def build_dyadic_geodesic(mu0: DiscreteMeasure, tmap: TransportMap,
                          depth: int, profile: Profile,
                          weighting: Optional[np.ndarray] = None
                          ) -> GeodesicFamily:
    """Midpoint-refined dyadic geodesic between mu0 and T_# mu0.

    Segment partials propagate in closed form: the first-half map of a
    segment with partials (a, b) has the composition partials (s1, s2) and
    the second half inherits (a / s1, b / s2); per-coordinate chain rule is
    valid because each factor is monotone in its own coordinate.
    """
    if depth < 0 or depth > 8:
        raise DomainError("depth must lie in [0, 8]")
    if tmap.source is not mu0:
        raise DomainError("map must be built on mu0")
    n = len(mu0)
    logrho0 = _log_rho(mu0)
    lm0 = _log_ref_density(mu0.x, mu0.y, profile)
    lmT = _log_ref_density(tmap.t1, tmap.t2, profile)
    a = np.ascontiguousarray(tmap.dt1_dx, dtype=np.float64)
    b = np.ascontiguousarray(tmap.dt2_dy, dtype=np.float64)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise DomainError("nonpositive transport partial")

    pts = [np.column_stack([mu0.x, mu0.y]),
           np.column_stack([tmap.t1, tmap.t2])]
    lrho = [logrho0, logrho0 + lm0 - lmT - np.log(a) - np.log(b)]
    seg_a = [a]
    seg_b = [b]
    times = [0.0, 1.0]

    for _ in range(depth):
        new_pts = [pts[0]]
        new_lrho = [lrho[0]]
        new_a, new_b, new_times = [], [], [times[0]]
        for s in range(len(seg_a)):
            pl, pr = pts[s], pts[s + 1]
            ds1, ds2, _, mx, my = kernels.composition_jacobian(
                np.ascontiguousarray(pl[:, 0]), np.ascontiguousarray(pl[:, 1]),
                np.ascontiguousarray(pr[:, 0]), np.ascontiguousarray(pr[:, 1]),
                seg_a[s], seg_b[s], profile.breaks, profile.c0)
            fmx = profile.f_batch(mx)
            if np.any(my < -1e-12) or np.any(my > fmx + 1e-12):
                raise DomainError("midpoint left the space; calibration "
                                  "failure")
            lml = _log_ref_density(pl[:, 0], pl[:, 1], profile)
            lmm = -np.log(fmx) - profile.params.K * (my / fmx) ** 2
            lr_mid = new_lrho[-1] + lml - lmm - np.log(ds1) - np.log(ds2)
            mid = np.column_stack([mx, my])
            new_pts.extend([mid, pr])
            new_lrho.extend([lr_mid, lrho[s + 1]])
            new_a.extend([ds1, seg_a[s] / ds1])
            new_b.extend([ds2, seg_b[s] / ds2])
            tmid = 0.5 * (times[s] + times[s + 1])
            new_times.extend([tmid, times[s + 1]])
        pts, lrho, seg_a, seg_b, times = (new_pts, new_lrho, new_a, new_b,
                                          new_times)

    points = np.stack(pts, axis=1)
    logrho = np.stack(lrho, axis=1)
    d01 = np.maximum(np.abs(tmap.t1 - mu0.x), np.abs(tmap.t2 - mu0.y))
    w = mu0.w if weighting is None else mu0.w * weighting
    w2sq = float(np.sum(w * d01 ** 2))
    return GeodesicFamily(depth=depth, times=np.array(times), points=points,
                          logrho=logrho, weights=mu0.w, w2_squared=w2sq,
                          weighting=weighting, eps_tag=mu0.eps_tag)


def verify_refinement_optimality(family: GeodesicFamily, interval: int,
                                 profile: Profile) -> bool:
    """LP cross-check of one refinement interval.

    The dyadic construction propagates segment maps in closed form; this
    re-solves the lexicographic transport problem between the two snapshot
    measures of the given interval and checks that the within-family
    coupling (path i to path i) is the exact optimum.
    """
    from .measures import COST_SCALE, DiscreteMeasure, solve_min_cost
    from .transport import SECONDARY_GUARD
    if not 0 <= interval < family.n_times - 1:
        raise DomainError("interval out of range")
    n = family.points.shape[0]

    def snap(j):
        return DiscreteMeasure(
            x=family.points[:, j, 0], y=family.points[:, j, 1],
            w=family.weights, cell_mass=np.ones(n),
            eps_tag=family.eps_tag, singular=np.zeros(n, dtype=bool))

    mu_l, mu_r = snap(interval), snap(interval + 1)
    primary = np.maximum(np.abs(mu_l.x[:, None] - mu_r.x[None, :]),
                         np.abs(mu_l.y[:, None] - mu_r.y[None, :])) ** 2
    de2 = ((mu_l.x[:, None] - mu_r.x[None, :]) ** 2
           + (mu_l.y[:, None] - mu_r.y[None, :]) ** 2)
    p_int = np.round(primary * COST_SCALE).astype(np.int64)
    s_int = np.round(de2 * COST_SCALE).astype(np.int64)
    combined = np.empty(p_int.shape, dtype=object)
    for i in range(n):
        for j in range(n):
            combined[i, j] = int(p_int[i, j]) * SECONDARY_GUARD \
                + int(s_int[i, j])
    opt, flow = solve_min_cost(mu_l, mu_r, combined)
    diag = sum(units for (i, j), units in flow.items() if i == j)
    total = sum(flow.values())
    return diag == total


def k_convexity_report(family: GeodesicFamily, K_test: float) -> list:
    """Convexity margins at every dyadic time.

    margin(t) = Ent(t) - (1 - t) Ent(0) - t Ent(1)
                + t (1 - t) (K_test / 2) W2^2;
    nonpositive margins certify the K_test-convexity inequality.
    """
    ents = family.entropies()
    t = family.times
    bound = ((1.0 - t) * ents[0] + t * ents[-1]
             - t * (1.0 - t) * 0.5 * K_test * family.w2_squared)
    rows = []
    for j in range(family.n_times):
        rows.append({
            "t": float(t[j]),
            "entropy": float(ents[j]),
            "bound": float(bound[j]),
            "margin": float(ents[j] - bound[j]),
        })
    return rows
