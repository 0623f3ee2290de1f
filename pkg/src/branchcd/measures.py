"""Discrete measures, relative entropy and exact optimal transport.

Measures are weighted atom clouds on a fiber-adapted grid: x uniform over a
window, y uniform in the fiber [0, f(x)] (so cell reference masses have the
exact closed form dx * integral of exp(-K u^2) over the cell's u-range).  On
the eps = 0 space the collapsed segment is discretized as one-dimensional
atoms whose reference mass is C_K * dx.

The transportation problem is solved exactly: squared sup-metric costs are
premultiplied by 2^48 and rounded to integers, weights are scaled to
integers summing to 2^53 (largest-remainder fixup), and the scaled problem
goes through the network-simplex min-cost-flow solver in arbitrary-precision
integer arithmetic.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import networkx as nx
import numpy as np

from .errors import DomainError, SingularSupportError
from .geometry import (Profile, SpaceParams, build_profile, c_constant,
                       gaussian_mass)

__all__ = [
    "DiscreteMeasure", "TransportPlan", "discretize", "entropy",
    "wasserstein", "check_cyclical_monotonicity", "solve_min_cost",
    "COST_SCALE", "MASS_SCALE",
]

COST_SCALE = 1 << 48
MASS_SCALE = 1 << 53


@dataclass
class DiscreteMeasure:
    """Weighted atoms with per-atom reference masses."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    cell_mass: np.ndarray          # m(cell) per atom, for entropy
    eps_tag: float                 # which space the measure lives on
    singular: np.ndarray           # bool: atom on the collapsed segment
    nx: int = 0                    # grid shape, 0 when not grid-backed
    ny: int = 0
    ix: Optional[np.ndarray] = None
    iy: Optional[np.ndarray] = None
    dx: float = 0.0

    def __len__(self):
        return self.x.shape[0]

    def validate(self, tol: float = 1e-12):
        if np.any(self.w < 0.0):
            raise DomainError("negative weight")
        if abs(float(self.w.sum()) - 1.0) > tol:
            raise DomainError("weights must sum to 1")

    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def to_json_dict(self) -> dict:
        return {
            "eps_tag": self.eps_tag,
            "nx": self.nx,
            "ny": self.ny,
            "dx": self.dx,
            "atoms": [
                {"x": float(xi), "y": float(yi), "w": float(wi),
                 "cell_mass": float(ci), "singular": bool(si)}
                for xi, yi, wi, ci, si in zip(self.x, self.y, self.w,
                                              self.cell_mass, self.singular)
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DiscreteMeasure":
        atoms = d["atoms"]
        return cls(
            x=np.array([a["x"] for a in atoms]),
            y=np.array([a["y"] for a in atoms]),
            w=np.array([a["w"] for a in atoms]),
            cell_mass=np.array([a["cell_mass"] for a in atoms]),
            eps_tag=float(d["eps_tag"]),
            singular=np.array([a["singular"] for a in atoms], dtype=bool),
            nx=int(d.get("nx", 0)),
            ny=int(d.get("ny", 0)),
            dx=float(d.get("dx", 0.0)),
        )


@dataclass
class TransportPlan:
    """Coupling support: entries (i, j, mass) plus endpoint coordinates."""

    src: np.ndarray                # source atom index per entry
    tgt: np.ndarray                # target atom index per entry
    mass: np.ndarray
    cost: np.ndarray               # squared sup-distance per entry
    src_xy: np.ndarray             # (n, 2) coordinates
    tgt_xy: np.ndarray
    cost_value: float = 0.0        # total squared-distance cost
    scaled_optimum: int = 0        # exact optimum in scaled arithmetic

    def __len__(self):
        return self.src.shape[0]

    def marginal_error(self, mu: "DiscreteMeasure",
                       nu: "DiscreteMeasure") -> float:
        m0 = np.zeros(len(mu))
        np.add.at(m0, self.src, self.mass)
        m1 = np.zeros(len(nu))
        np.add.at(m1, self.tgt, self.mass)
        return max(float(np.abs(m0 - mu.w).max()),
                   float(np.abs(m1 - nu.w).max()))


def discretize(params: SpaceParams, rho: Callable, grid: Tuple[int, int],
               x_range: Tuple[float, float] = (-1.0, 1.0),
               profile: Optional[Profile] = None) -> DiscreteMeasure:
    """Atomize rho * m on the fiber-adapted grid.

    rho is a density with respect to the reference measure, vectorized over
    coordinate arrays.  Weights are rho at the cell center times the exact
    cell reference mass, renormalized to total 1.
    """
    nx_, ny_ = grid
    if nx_ < 1 or ny_ < 1:
        raise DomainError("grid resolutions must be >= 1")
    if profile is None:
        profile = build_profile(params)
    x_edges = np.linspace(x_range[0], x_range[1], nx_ + 1)
    xc = 0.5 * (x_edges[:-1] + x_edges[1:])
    dx = (x_range[1] - x_range[0]) / nx_
    fc = profile.f_batch(xc)

    u_edges = np.linspace(0.0, 1.0, ny_ + 1)
    u_mass = gaussian_mass(params.K, u_edges[:-1], u_edges[1:])
    uc = 0.5 * (u_edges[:-1] + u_edges[1:])
    ck = c_constant(params.K)

    xs, ys, cm, sing, ixs, iys = [], [], [], [], [], []
    for i in range(nx_):
        if fc[i] == 0.0:
            xs.append(xc[i])
            ys.append(0.0)
            cm.append(ck * dx)
            sing.append(True)
            ixs.append(i)
            iys.append(0)
        else:
            for j in range(ny_):
                xs.append(xc[i])
                ys.append(uc[j] * fc[i])
                cm.append(dx * u_mass[j])
                sing.append(False)
                ixs.append(i)
                iys.append(j)
    x = np.array(xs)
    y = np.array(ys)
    cell = np.array(cm)
    w = np.asarray(rho(x, y), dtype=np.float64) * cell
    total = float(w.sum())
    if not total > 0.0:
        raise DomainError("density is not normalizable on the grid")
    w = w / total
    return DiscreteMeasure(x=x, y=y, w=w, cell_mass=cell,
                           eps_tag=params.epsilon,
                           singular=np.array(sing, dtype=bool),
                           nx=nx_, ny=ny_, ix=np.array(ixs, dtype=np.int64),
                           iy=np.array(iys, dtype=np.int64), dx=dx)


def entropy(mu: DiscreteMeasure, params: SpaceParams = None) -> float:
    """Relative entropy sum w log(w / cell_mass) over charged atoms."""
    mask = mu.w > 0.0
    if np.any(mu.cell_mass[mask] <= 0.0):
        raise SingularSupportError("charged atom with zero reference mass")
    w = mu.w[mask]
    return float(np.sum(w * np.log(w / mu.cell_mass[mask])))


def _scale_weights(w: np.ndarray, total: int) -> list:
    """Integer weights summing exactly to ``total`` (largest remainder)."""
    raw = w * float(total)
    base = np.floor(raw).astype(object)
    scaled = [int(b) for b in base]
    deficit = total - sum(scaled)
    order = np.argsort(-(raw - np.floor(raw)), kind="stable")
    step = 1 if deficit >= 0 else -1
    for idx in order[:abs(deficit)]:
        scaled[int(idx)] += step
    return scaled


def _sup_cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    dxm = np.abs(mu.x[:, None] - nu.x[None, :])
    dym = np.abs(mu.y[:, None] - nu.y[None, :])
    return np.maximum(dxm, dym) ** 2


def solve_min_cost(mu: DiscreteMeasure, nu: DiscreteMeasure,
                   cost_int: np.ndarray,
                   mass_scale: int = MASS_SCALE) -> Tuple[int, dict]:
    """Exact min-cost flow of the scaled transportation problem.

    cost_int holds python-int-safe per-edge costs (any magnitude; arithmetic
    is arbitrary precision).  Returns the scaled optimum and the flow dict
    {(i, j): units}.
    """
    sw = _scale_weights(mu.w, mass_scale)
    tw = _scale_weights(nu.w, mass_scale)
    g = nx.DiGraph()
    for i, wi in enumerate(sw):
        g.add_node(("s", i), demand=-wi)
    for j, wj in enumerate(tw):
        g.add_node(("t", j), demand=wj)
    n_src, n_tgt = len(sw), len(tw)
    for i in range(n_src):
        row = cost_int[i]
        for j in range(n_tgt):
            g.add_edge(("s", i), ("t", j), weight=int(row[j]))
    opt, flow = nx.network_simplex(g)
    plan = {}
    for i in range(n_src):
        for (kind, j), units in flow[("s", i)].items():
            if units > 0:
                plan[(i, j)] = units
    return int(opt), plan


def _plan_from_flow(mu, nu, flow, cost_float, scaled_opt,
                    mass_scale: int = MASS_SCALE) -> TransportPlan:
    items = sorted(flow.items())
    src = np.array([ij[0] for ij, _ in items], dtype=np.int64)
    tgt = np.array([ij[1] for ij, _ in items], dtype=np.int64)
    mass = np.array([units for _, units in items], dtype=np.float64)
    mass /= float(mass_scale)
    cost = cost_float[src, tgt]
    return TransportPlan(
        src=src, tgt=tgt, mass=mass, cost=cost,
        src_xy=np.column_stack([mu.x[src], mu.y[src]]),
        tgt_xy=np.column_stack([nu.x[tgt], nu.y[tgt]]),
        cost_value=float(np.sum(mass * cost)),
        scaled_optimum=scaled_opt)


def wasserstein(mu: DiscreteMeasure,
                nu: DiscreteMeasure) -> Tuple[float, TransportPlan]:
    """Exact squared-sup-metric transportation optimum and a witness plan."""
    mu.validate(1e-9)
    nu.validate(1e-9)
    cost_float = _sup_cost_matrix(mu, nu)
    cost_int = np.round(cost_float * COST_SCALE).astype(np.int64)
    opt, flow = solve_min_cost(mu, nu, cost_int)
    plan = _plan_from_flow(mu, nu, flow, cost_float, opt)
    return plan.cost_value, plan


def save_measure(path, mu: DiscreteMeasure):
    from .reports import write_json
    return write_json(path, mu.to_json_dict())


def load_measure(path) -> DiscreteMeasure:
    import json
    with open(path, "r", encoding="utf-8") as fh:
        return DiscreteMeasure.from_json_dict(json.load(fh))


def save_plan(path, plan: TransportPlan):
    from .reports import write_csv
    rows = [[int(i), int(j), float(m), float(c)]
            for i, j, m, c in zip(plan.src, plan.tgt, plan.mass, plan.cost)]
    return write_csv(path, ["i", "j", "mass", "cost"], rows)


def load_plan_entries(path):
    """(i, j, mass, cost) arrays from a plan CSV; exact float round-trip."""
    import csv
    src, tgt, mass, cost = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for row in list(csv.reader(fh))[1:]:
            src.append(int(row[0]))
            tgt.append(int(row[1]))
            mass.append(float(row[2]))
            cost.append(float(row[3]))
    return (np.array(src), np.array(tgt), np.array(mass), np.array(cost))


def check_cyclical_monotonicity(plan: TransportPlan, sample_count: int = 2000,
                                seed: int = 0, tol: float = 1e-9) -> dict:
    """Sampled pair and triple cycle tests on the plan support.

    A violation is a cycle whose permuted cost undercuts the matched cost by
    more than tol.  Returns the violation count and the worst margin
    (min over sampled cycles of permuted - matched).
    """
    n = len(plan)
    sx, sy = plan.src_xy[:, 0], plan.src_xy[:, 1]
    tx, ty = plan.tgt_xy[:, 0], plan.tgt_xy[:, 1]

    def cost(i, j):
        return np.maximum(np.abs(sx[i] - tx[j]), np.abs(sy[i] - ty[j])) ** 2

    rng = np.random.default_rng(seed)
    worst = np.inf
    violations = 0
    if n >= 2:
        a = rng.integers(0, n, size=sample_count)
        b = rng.integers(0, n, size=sample_count)
        keep = a != b
        a, b = a[keep], b[keep]
        margin = cost(a, b) + cost(b, a) - cost(a, a) - cost(b, b)
        if margin.size:
            worst = min(worst, float(margin.min()))
            violations += int(np.sum(margin < -tol))
    if n >= 3:
        a = rng.integers(0, n, size=sample_count)
        b = rng.integers(0, n, size=sample_count)
        c = rng.integers(0, n, size=sample_count)
        keep = (a != b) & (b != c) & (a != c)
        a, b, c = a[keep], b[keep], c[keep]
        matched = cost(a, a) + cost(b, b) + cost(c, c)
        for pb, pc, pa in (((b, c, a)), ((c, a, b))):
            margin = cost(a, pb) + cost(b, pc) + cost(c, pa) - matched
            if margin.size:
                worst = min(worst, float(margin.min()))
                violations += int(np.sum(margin < -tol))
    return {"violations": violations,
            "worst_margin": worst if np.isfinite(worst) else 0.0,
            "tol": tol}
