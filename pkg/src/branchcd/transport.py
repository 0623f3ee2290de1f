"""Structured optimal transport maps via lexicographic minimization.

Stage 1 minimizes the squared sup-metric cost; stage 2 breaks the massive
ties of that degenerate cost by minimizing squared Euclidean cost over the
optimal face.  Both stages run as one exact integer solve: with costs scaled
to integers, minimizing  primary * M + secondary  for M larger than any
attainable total secondary cost is equivalent to the two-stage program, and
arbitrary-precision arithmetic keeps the equivalence exact.

The resulting plan is converted to map form (one target per source atom,
barycentric merge of targets that only split across a cell neighborhood),
with finite-difference partials over grid neighbors.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .backend import kernels
from .errors import DomainError, StructuredMapError
from .geometry import Profile, branch_tag
from .measures import (COST_SCALE, DiscreteMeasure, TransportPlan,
                       _plan_from_flow, _sup_cost_matrix, solve_min_cost)

__all__ = ["TransportMap", "solve_structured", "verify_map_properties",
           "analytic_family", "SECONDARY_GUARD"]

# any total secondary cost is < MASS_SCALE * (max cost_int) < 2^104
SECONDARY_GUARD = 1 << 104

SPLIT_MASS_LIMIT = 0.05


@dataclass
class TransportMap:
    """Map form of a coupling: per-source target, partials, pair classes."""

    source: DiscreteMeasure
    t1: np.ndarray
    t2: np.ndarray
    dt1_dx: np.ndarray
    dt2_dy: np.ndarray
    branch: np.ndarray            # pair class code per atom
    split_mass: float = 0.0
    exact_partials: bool = False

    def __len__(self):
        return self.t1.shape[0]

    def pushforward_weights(self, f: Optional[np.ndarray] = None):
        w = self.source.w if f is None else self.source.w * f
        return w


def _lexicographic_costs(mu, nu):
    primary = _sup_cost_matrix(mu, nu)
    de2 = ((mu.x[:, None] - nu.x[None, :]) ** 2
           + (mu.y[:, None] - nu.y[None, :]) ** 2)
    p_int = np.round(primary * COST_SCALE).astype(np.int64)
    s_int = np.round(de2 * COST_SCALE).astype(np.int64)
    return primary, p_int, s_int


def solve_structured(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                     profile: Profile) -> Tuple[TransportPlan, TransportMap]:
    """Lexicographic optimal plan and its map form."""
    if np.any(mu0.singular) or np.any(mu1.singular):
        raise DomainError("structured solve needs absolutely continuous "
                          "discretizations")
    mu0.validate(1e-9)
    mu1.validate(1e-9)
    primary, p_int, s_int = _lexicographic_costs(mu0, mu1)
    combined = np.empty(p_int.shape, dtype=object)
    for i in range(p_int.shape[0]):
        for j in range(p_int.shape[1]):
            combined[i, j] = int(p_int[i, j]) * SECONDARY_GUARD \
                + int(s_int[i, j])
    opt, flow = solve_min_cost(mu0, mu1, combined)
    primary_opt = opt // SECONDARY_GUARD
    plan = _plan_from_flow(mu0, mu1, flow, primary, int(primary_opt))
    tmap = plan_to_map(plan, mu0, mu1)
    tmap = attach_stencil_partials(tmap)
    return plan, tmap


def plan_to_map(plan: TransportPlan, mu0: DiscreteMeasure,
                mu1: DiscreteMeasure) -> TransportMap:
    """Barycentric map extraction with a genuine-splitting budget.

    A source atom coupled to several targets is merged when the targets sit
    within one cell neighborhood of their barycenter (discretization noise);
    otherwise its whole mass counts as split.  More than SPLIT_MASS_LIMIT of
    split mass aborts.
    """
    n = len(mu0)
    t1 = np.empty(n)
    t2 = np.empty(n)
    split = 0.0
    neigh = _cell_diameter(mu1) * 1.5
    for i in range(n):
        sel = plan.src == i
        if not np.any(sel):
            t1[i] = mu0.x[i]
            t2[i] = mu0.y[i]
            continue
        m = plan.mass[sel]
        px = plan.tgt_xy[sel, 0]
        py = plan.tgt_xy[sel, 1]
        bx = float(np.sum(m * px) / m.sum())
        by = float(np.sum(m * py) / m.sum())
        t1[i] = bx
        t2[i] = by
        if sel.sum() > 1:
            spread = np.maximum(np.abs(px - bx), np.abs(py - by))
            if float(spread.max()) > neigh:
                split += float(m.sum())
    if split > SPLIT_MASS_LIMIT:
        raise StructuredMapError(
            f"{split:.3f} of the mass splits genuinely (> "
            f"{SPLIT_MASS_LIMIT}); structured map unavailable")
    br = kernels.classify(mu0.x, mu0.y, t1, t2)
    return TransportMap(source=mu0, t1=t1, t2=t2,
                        dt1_dx=np.ones(n), dt2_dy=np.ones(n),
                        branch=br, split_mass=split)


def _cell_diameter(mu: DiscreteMeasure) -> float:
    if mu.nx and mu.dx:
        fy = 0.0
        if mu.ny:
            mask = ~mu.singular
            if np.any(mask):
                fy = float(np.max(mu.y[mask])) / max(mu.ny, 1)
        return max(mu.dx, fy)
    return 0.0


def attach_stencil_partials(tmap: TransportMap) -> TransportMap:
    """Central finite differences of (T1, T2) over grid neighbors; one-sided
    at the boundary; grid-free sources keep unit partials."""
    mu = tmap.source
    if not mu.nx or mu.ix is None:
        return tmap
    n = len(mu)
    index = {}
    for a in range(n):
        index[(int(mu.ix[a]), int(mu.iy[a]))] = a
    a_part = np.ones(n)
    b_part = np.ones(n)
    for a in range(n):
        i, j = int(mu.ix[a]), int(mu.iy[a])
        lo = index.get((i - 1, j))
        hi = index.get((i + 1, j))
        if lo is not None and hi is not None:
            a_part[a] = (tmap.t1[hi] - tmap.t1[lo]) / (mu.x[hi] - mu.x[lo])
        elif hi is not None and mu.x[hi] != mu.x[a]:
            a_part[a] = (tmap.t1[hi] - tmap.t1[a]) / (mu.x[hi] - mu.x[a])
        elif lo is not None and mu.x[a] != mu.x[lo]:
            a_part[a] = (tmap.t1[a] - tmap.t1[lo]) / (mu.x[a] - mu.x[lo])
        lo = index.get((i, j - 1))
        hi = index.get((i, j + 1))
        if lo is not None and hi is not None and mu.y[hi] != mu.y[lo]:
            b_part[a] = (tmap.t2[hi] - tmap.t2[lo]) / (mu.y[hi] - mu.y[lo])
        elif hi is not None and mu.y[hi] != mu.y[a]:
            b_part[a] = (tmap.t2[hi] - tmap.t2[a]) / (mu.y[hi] - mu.y[a])
        elif lo is not None and mu.y[a] != mu.y[lo]:
            b_part[a] = (tmap.t2[a] - tmap.t2[lo]) / (mu.y[a] - mu.y[lo])
    tmap.dt1_dx = a_part
    tmap.dt2_dy = b_part
    return tmap


def verify_map_properties(tmap: TransportMap, tol: float = 1e-6) -> list:
    """Worst violations of the structured-map rigidity properties.

    Local constancy is measured against the neighbor coordinate step, so the
    tolerance scales with cell size.
    """
    mu = tmap.source
    n = len(mu)
    props = {
        "t1_locally_constant_in_y_on_H": 0.0,
        "t2_locally_constant_in_x_on_V": 0.0,
        "t2_fiber_monotone": 0.0,
        "dt1_dx_nonnegative_on_HV": 0.0,
        "dt2_dy_nonnegative_on_HV": 0.0,
    }
    locs = {p: -1 for p in props}
    is_h = (tmap.branch >= 2)
    is_v = (tmap.branch == 0)
    hv = is_h | is_v

    if mu.nx and mu.ix is not None:
        index = {}
        for a in range(n):
            index[(int(mu.ix[a]), int(mu.iy[a]))] = a
        for a in range(n):
            i, j = int(mu.ix[a]), int(mu.iy[a])
            up = index.get((i, j + 1))
            if up is not None:
                dy = mu.y[up] - mu.y[a]
                if dy > 0:
                    v = -(tmap.t2[up] - tmap.t2[a]) / dy
                    if v > props["t2_fiber_monotone"]:
                        props["t2_fiber_monotone"] = v
                        locs["t2_fiber_monotone"] = a
                    if is_h[a] and is_h[up]:
                        v = abs(tmap.t1[up] - tmap.t1[a]) / dy
                        if v > props["t1_locally_constant_in_y_on_H"]:
                            props["t1_locally_constant_in_y_on_H"] = v
                            locs["t1_locally_constant_in_y_on_H"] = a
            rt = index.get((i + 1, j))
            if rt is not None and is_v[a] and is_v[rt]:
                dxn = mu.x[rt] - mu.x[a]
                if dxn > 0:
                    v = abs(tmap.t2[rt] - tmap.t2[a]) / dxn
                    if v > props["t2_locally_constant_in_x_on_V"]:
                        props["t2_locally_constant_in_x_on_V"] = v
                        locs["t2_locally_constant_in_x_on_V"] = a

    if np.any(hv):
        v = -tmap.dt1_dx[hv]
        a = int(np.argmax(v))
        if v[a] > props["dt1_dx_nonnegative_on_HV"]:
            props["dt1_dx_nonnegative_on_HV"] = float(v[a])
            locs["dt1_dx_nonnegative_on_HV"] = int(np.flatnonzero(hv)[a])
        v = -tmap.dt2_dy[hv]
        a = int(np.argmax(v))
        if v[a] > props["dt2_dy_nonnegative_on_HV"]:
            props["dt2_dy_nonnegative_on_HV"] = float(v[a])
            locs["dt2_dy_nonnegative_on_HV"] = int(np.flatnonzero(hv)[a])

    report = []
    for name, worst in props.items():
        report.append({
            "property": name,
            "worst_violation": float(max(worst, 0.0)),
            "location": int(locs[name]),
            "pass": bool(worst <= tol),
        })
    return report


def analytic_family(name: str, mu0: DiscreteMeasure, profile: Profile,
                    delta: float = 0.0, delta2: float = 0.0,
                    lam: float = 0.75) -> TransportMap:
    """Closed-form test transports with exact partials.

    horizontal_rescaled: (x, y) -> (x + delta, y f(x + delta) / f(x))
    vertical_monotone:   (x, y) -> (x, lam y + (1 - lam) y^2 / f(x))
    diagonal:            (x, y) -> (x + delta, y + delta2)
    """
    mu0.validate(1e-9)
    x, y = mu0.x, mu0.y
    if name == "horizontal_rescaled":
        fx = profile.f_batch(x)
        fT = profile.f_batch(x + delta)
        t1 = x + delta
        t2 = y * fT / fx
        a = np.ones(len(mu0))
        b = fT / fx
    elif name == "vertical_monotone":
        if not 0.0 < lam <= 1.0:
            raise DomainError("lam must lie in (0, 1]")
        fx = profile.f_batch(x)
        t1 = x.copy()
        t2 = lam * y + (1.0 - lam) * y * y / fx
        a = np.ones(len(mu0))
        b = lam + 2.0 * (1.0 - lam) * y / fx
    elif name == "diagonal":
        t1 = x + delta
        t2 = y + delta2
        a = np.ones(len(mu0))
        b = np.ones(len(mu0))
    else:
        raise DomainError(f"unknown analytic family {name!r}")
    if np.any(t1 < -1.0) or np.any(t1 > 1.0):
        raise DomainError("family image leaves [-1, 1]")
    fT = profile.f_batch(t1)
    if np.any(t2 < -1e-15) or np.any(t2 > fT + 1e-12):
        raise DomainError("family image leaves the space")
    br = kernels.classify(x, y, t1, t2)
    return TransportMap(source=mu0, t1=t1, t2=t2, dt1_dx=a, dt2_dy=b,
                        branch=br, exact_partials=True)


def branch_counts(tmap: TransportMap) -> dict:
    out = {}
    for code in range(4):
        out[branch_tag(code)] = int(np.sum(tmap.branch == code))
    return out
