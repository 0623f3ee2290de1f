"""End-to-end scenarios: convergence certification, the failure of strict
entropy convexity on the limit space, calibration runs, and the scenario
driver behind the CLI.

The limit-space geodesic between the left segment strip and a curved-region
strip is realized in product form: horizontal position x drawn uniformly on
the strip, vertical level u drawn from the fiber Gaussian, path
t -> (x + t, u f(x + t)).  Every path is a unit-speed sup-metric geodesic
and every time slice is exactly the translated strip measure, which makes
the entropy bookkeeping closed-form.
"""

import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import reports, sweeps
from .backend import BACKEND, kernels
from .convexity import (GeodesicFamily, build_dyadic_geodesic, calibrate_K,
                        k_convexity_report)
from .errors import DomainError, ParameterError
from .geometry import (Profile, SpaceParams, build_profile, c_constant,
                       gaussian_mass)
from .measures import DiscreteMeasure, discretize, entropy
from .midpoint import injectivity_derivative_bound
from .transport import analytic_family

__all__ = [
    "ScenarioConfig", "CounterexampleReport", "CanonicalPlan",
    "mgh_check", "eta_construct", "counterexample_run", "run_scenario",
    "branch_sample_arrays", "jacobi_branch_sweep", "calibrate_condition_K",
    "calibrate_lemma_k", "SCENARIOS",
]

STRIP = (-0.5, -0.25)


# ---------------------------------------------------------------------------
# measured convergence certificate


def mgh_check(params: SpaceParams, n_pairs: int = 100_000, seed: int = 0,
              profile: Optional[Profile] = None) -> dict:
    """Distortion and pushforward-density audit of the collapse map.

    The map keeps x and rescales y by f0/f_eps; the profile shift identity
    f_eps = f0 + eps makes both its distortion bound 2 eps and the density
    transport exact, and this measures how exactly.
    """
    if params.epsilon <= 0.0:
        raise ParameterError("the convergence check needs eps > 0")
    if profile is None:
        profile = build_profile(params)
    rng = np.random.default_rng(seed)
    xa = rng.uniform(-1.0, 1.0, n_pairs)
    xb = rng.uniform(-1.0, 1.0, n_pairs)
    ya = rng.uniform(0.0, 1.0, n_pairs) * profile.f_batch(xa)
    yb = rng.uniform(0.0, 1.0, n_pairs) * profile.f_batch(xb)
    dist = kernels.mgh_distortion(xa, ya, xb, yb, params.epsilon,
                                  profile.breaks, profile.c0)
    max_distortion = float(dist.max())

    # pushforward density at points of the limit space with f0 > 0
    k = params.k
    xs = rng.uniform(-k + 1e-9, 1.0, 4096)
    feps = profile.f_batch(xs)
    f0 = feps - params.epsilon
    u = rng.uniform(0.0, 1.0, xs.shape[0])
    y0 = u * f0
    pushed = (np.exp(-params.K * (y0 * feps / (f0 * feps)) ** 2) / feps
              * (feps / f0))
    target = np.exp(-params.K * (y0 / f0) ** 2) / f0
    rel = float(np.max(np.abs(pushed - target) / target))
    return {
        "epsilon": params.epsilon,
        "n_pairs": int(n_pairs),
        "max_distortion": max_distortion,
        "distortion_bound": 2.0 * params.epsilon,
        "pushforward_rel_error": rel,
    }


# ---------------------------------------------------------------------------
# canonical limit-space geodesic plan and the convexity counterexample


@dataclass
class CanonicalPlan:
    """Product-form geodesic plan between the strip at t=0 and at t=1."""

    params: SpaceParams
    profile: Profile
    x0: np.ndarray          # strip cell centers at time 0
    wx: np.ndarray
    dx: float
    u: np.ndarray           # fiber levels (cell centers in [0, 1])
    wu: np.ndarray          # normalized fiber Gaussian cell masses
    u_mass: np.ndarray      # unnormalized cell masses
    c_k: float

    def point_arrays(self, t: float):
        """Path points at time t: shapes (nx, ny) broadcastable."""
        x = self.x0[:, None] + t
        f = self.profile.f_batch(self.x0 + t)[:, None]
        y = self.u[None, :] * f
        return x, y

    def fiber_entropy(self, t: float, v: np.ndarray) -> float:
        """Entropy of the time-t slice weighted per fiber level by v.

        v is a fiber weight vector (v >= 0); atom (i, j) carries mass
        wx_i * v_j.  Levels collapse onto the segment where the profile
        vanishes.
        """
        f = self.profile.f_batch(self.x0 + t)
        pos = v > 0.0
        ent_c = float(np.sum(v[pos] * np.log(4.0 * v[pos]
                                             / self.u_mass[pos])))
        tot = float(np.sum(v))
        ent_l = tot * float(np.log(4.0 * tot / self.c_k)) if tot else 0.0
        n_c = int(np.sum(f > 0.0))
        n_l = f.shape[0] - n_c
        nx = f.shape[0]
        return float(n_c * ent_c + n_l * ent_l) / nx


def eta_construct(params: SpaceParams, grid, depth: int = 5,
                  profile: Optional[Profile] = None) -> GeodesicFamily:
    """Canonical plan as a dyadic geodesic family.

    The slice measure is the translated strip measure with constant density
    4/C_K at every time, so the tracked log densities are constant.
    """
    plan = _canonical_plan(params, grid, profile)
    nx, ny = grid
    n_t = (1 << depth) + 1
    times = np.arange(n_t) / float(n_t - 1)
    n_atoms = nx * ny
    pts = np.empty((n_atoms, n_t, 2))
    for j, t in enumerate(times):
        x, y = plan.point_arrays(float(t))
        pts[:, j, 0] = np.repeat(x[:, 0], ny)
        pts[:, j, 1] = y.reshape(-1)
    w = np.repeat(plan.wx, ny) * np.tile(plan.wu, nx)
    logrho = np.full((n_atoms, n_t), np.log(4.0 / plan.c_k))
    return GeodesicFamily(depth=depth, times=times, points=pts,
                          logrho=logrho, weights=w, w2_squared=1.0,
                          eps_tag=params.epsilon)


def _canonical_plan(params, grid, profile=None) -> CanonicalPlan:
    if params.epsilon != 0.0:
        raise ParameterError("the counterexample lives on the eps = 0 space")
    if profile is None:
        profile = build_profile(params)
    nx, ny = grid
    if nx < 20:
        raise DomainError("strip must span at least 20 cells")
    edges = np.linspace(STRIP[0], STRIP[1], nx + 1)
    x0 = 0.5 * (edges[:-1] + edges[1:])
    dx = (STRIP[1] - STRIP[0]) / nx
    wx = np.full(nx, 1.0 / nx)
    u_edges = np.linspace(0.0, 1.0, ny + 1)
    u = 0.5 * (u_edges[:-1] + u_edges[1:])
    u_mass = gaussian_mass(params.K, u_edges[:-1], u_edges[1:])
    c_k = c_constant(params.K)
    wu = u_mass / c_k
    return CanonicalPlan(params=params, profile=profile, x0=x0, wx=wx,
                         dx=dx, u=u, wu=wu, u_mass=u_mass, c_k=c_k)


def mixing_kernel(plan: CanonicalPlan, alpha: float) -> np.ndarray:
    """Vertical redistribution kernel (1 - alpha) I + alpha redraw.

    Rows are indexed by the level before mixing, columns after; the fiber
    marginal is preserved for every alpha in [0, 1].
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError("alpha must lie in [0, 1]")
    ny = plan.u.shape[0]
    return (1.0 - alpha) * np.eye(ny) + alpha * np.tile(plan.wu, (ny, 1))


@dataclass
class CounterexampleReport:
    c_k: float
    c_k_prime: float
    ent_mu0: float
    ent_mu0_target: float
    ent_tbar_weighted: float
    ent_tbar_target: float
    ent0_weighted: float
    ent1_weighted: float
    entropy_difference: float       # endpoint comparison
    margins_selected: list          # (t, margin) along the selected plan
    fpath: dict                     # reweighted second verification path
    violation_magnitude: float
    tolerance: float
    verdict: str


def counterexample_run(params: SpaceParams, grid, tbar: float = 1.0,
                       mixing: Optional[np.ndarray] = None,
                       alpha: float = 1.0, tol: float = 1e-6,
                       profile: Optional[Profile] = None,
                       n_margin_times: int = 17) -> CounterexampleReport:
    """Certify the failure of convexity along reweightings of the canonical
    geodesic plan.

    The primary path reweights by the lower-half-fiber selector at tbar and
    compares entropies at 0 and tbar (endpoint comparison when tbar = 1),
    recording convexity margins at interior times.  The second path takes a
    vertically redistributed plan (the supplied mixing kernel, or the
    alpha-redraw one), builds the support set of its terminal density, finds
    the level-set cutoff by bisection on the strict integral criterion, and
    evaluates the three entropies of the reweighted comparison.
    """
    plan = _canonical_plan(params, grid, profile)
    k = params.k
    if not STRIP[0] + tbar > k:
        raise DomainError("tbar strip must lie in the curved region")
    c_k = plan.c_k
    c_kp = c_constant(params.K, 0.5)

    # primary path: lower-half selection at tbar along the canonical plan
    mask = plan.u <= 0.5
    z = float(np.sum(plan.wu[mask]))
    vtilde = np.where(mask, plan.wu, 0.0) / z
    ent_mu0 = plan.fiber_entropy(0.0, plan.wu)
    ent0_w = plan.fiber_entropy(0.0, vtilde)
    ent1_w = plan.fiber_entropy(1.0, vtilde)
    ent_tbar_w = plan.fiber_entropy(float(tbar), vtilde)
    margins = []
    for t in np.linspace(0.0, 1.0, n_margin_times):
        e = plan.fiber_entropy(float(t), vtilde)
        margins.append((float(t),
                        float(e - (1.0 - t) * ent0_w - t * ent1_w)))

    # second path: redistributed plan, terminal support set, cutoff search
    tbar_mix = float(tbar) if tbar < 1.0 else 0.75
    if mixing is None:
        mixing = mixing_kernel(plan, alpha)
    fpath = _reweighted_path(plan, mixing, vtilde, tbar_mix, c_k, c_kp)

    diff = ent_tbar_w - ent0_w
    violation = max(max(m for _, m in margins), fpath["margin"])
    verdict = ("strict-CD-violated" if violation > tol else "no-violation")
    return CounterexampleReport(
        c_k=c_k, c_k_prime=c_kp,
        ent_mu0=ent_mu0, ent_mu0_target=float(np.log(4.0 / c_k)),
        ent_tbar_weighted=ent_tbar_w,
        ent_tbar_target=float(np.log(4.0 / c_kp)),
        ent0_weighted=ent0_w, ent1_weighted=ent1_w,
        entropy_difference=diff,
        margins_selected=margins, fpath=fpath,
        violation_magnitude=float(violation), tolerance=tol,
        verdict=verdict)


def _reweighted_path(plan, mixing, vtilde, tbar_mix, c_k, c_kp) -> dict:
    """The proof's harder branch on a redistributed plan."""
    ny = plan.u.shape[0]
    if mixing.shape != (ny, ny):
        raise DomainError("mixing kernel shape mismatch")
    marginal = plan.wu @ mixing
    if np.max(np.abs(marginal - plan.wu)) > 1e-9:
        raise DomainError("mixing kernel must preserve the fiber marginal")
    if 3.0 * plan.params.k > 1.0 - tbar_mix:
        raise DomainError("mixed paths would exceed unit speed")

    q = vtilde @ mixing                    # terminal fiber distribution
    rho1 = np.where(q > 0.0, 4.0 * q / plan.u_mass, 0.0)
    support_mass = float(np.sum(plan.wu[q > 0.0]))
    rhs = (c_k / 4.0) * np.log(c_kp / c_k)

    uniform = (abs(support_mass - c_kp / c_k) <= 1e-9
               and np.allclose(rho1[q > 0.0], 4.0 / c_kp, rtol=1e-9))
    if uniform:
        # terminal density already uniform at 4/C'_K on its support
        ent1 = plan.fiber_entropy(1.0, q)
        ent0 = plan.fiber_entropy(0.0, vtilde)
        ent_tb = plan.fiber_entropy(tbar_mix, vtilde)
        margin = ent_tb - (1.0 - tbar_mix) * ent0 - tbar_mix * ent1
        return {"case": "uniform-support", "tbar": tbar_mix,
                "c_bar": None, "ent0": ent0, "ent_tbar": ent_tb,
                "ent1": ent1, "margin": float(margin),
                "integral_lhs": (c_k / 4.0) * float(np.log(support_mass)),
                "integral_rhs": float(rhs)}

    def lhs_of(c):
        sel = rho1 > c
        m = float(np.sum(plan.wu[sel]))
        return (c_k / 4.0) * np.log(m) if m > 0.0 else -np.inf

    if not lhs_of(0.0) > rhs:
        raise DomainError("terminal support violates the strict integral "
                          "criterion; not a valid redistributed plan")
    # the level-set integral is a step function of c; candidate cutoffs sit
    # in the gaps of the terminal density's level structure, and bisection
    # over them finds the largest cutoff still strictly above the criterion
    levels = np.unique(rho1[rho1 > 0.0])
    keep = np.ones(levels.shape[0], dtype=bool)
    keep[1:] = np.diff(levels) > 1e-9 * levels[1:]
    levels = levels[keep]
    cuts = np.concatenate([[0.5 * levels[0]],
                           0.5 * (levels[:-1] + levels[1:])])
    lo_i, hi_i = 0, cuts.shape[0]
    while hi_i - lo_i > 1:
        mid_i = (lo_i + hi_i) // 2
        if lhs_of(float(cuts[mid_i])) > rhs:
            lo_i = mid_i
        else:
            hi_i = mid_i
    c_bar = float(cuts[lo_i])
    sel = rho1 > c_bar
    m_fiber = float(np.sum(plan.wu[sel]))
    phi = np.where(sel, (4.0 / c_k) / (m_fiber * np.where(sel, rho1, 1.0)),
                   0.0)
    total = float(vtilde @ mixing @ phi)
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"reweighting does not normalize: {total}")

    s_j = mixing @ phi                     # per pre-mixing level
    v0 = vtilde * s_j
    v1 = phi * q
    ent0 = plan.fiber_entropy(0.0, v0)
    ent_tb = plan.fiber_entropy(tbar_mix, v0)
    ent1 = plan.fiber_entropy(1.0, v1)
    margin = ent_tb - (1.0 - tbar_mix) * ent0 - tbar_mix * ent1
    return {"case": "reweighted", "tbar": tbar_mix, "c_bar": float(c_bar),
            "ent0": ent0, "ent_tbar": ent_tb, "ent1": ent1,
            "margin": float(margin),
            "integral_lhs": float(lhs_of(c_bar)),
            "integral_rhs": float(rhs)}


# ---------------------------------------------------------------------------
# condition sweeps over the analytic transport families


def branch_sample_arrays(profile: Profile, branch: str, n: int, seed: int):
    """Admissible pointwise condition samples for one pair class.

    Returns arrays (x, y, t1, t2, a, b).  Partials are drawn log-uniformly
    in [1/3, 3]; geometry keeps source and target in the space with the
    requested classification.
    """
    rng = np.random.default_rng(seed)
    if branch == "H0":
        x = rng.uniform(-1.0, 0.45, n)
        delta = rng.uniform(0.05, 0.5, n)
        t1 = x + delta
        fx = profile.f_batch(x)
        ft = profile.f_batch(t1)
        y = rng.uniform(0.0, 1.0, n) * fx
        half = rng.random(n) < 0.5
        t2 = np.where(half, y * ft / fx,
                      rng.uniform(0.0, 1.0, n) * np.minimum(ft, y + 0.5
                                                            * delta))
        b = np.where(half, ft / fx, np.exp(rng.uniform(np.log(1 / 3.0),
                                                       np.log(3.0), n)))
    elif branch == "H1":
        x = rng.uniform(-1.0, 0.9, n)
        fx = profile.f_batch(x)
        gamma = rng.uniform(0.55, 0.95, n)
        cap = np.minimum(0.9 * fx / gamma, 1.0 - x)
        delta = cap * rng.uniform(0.05, 1.0, n)
        t1 = x + delta
        ft = profile.f_batch(t1)
        up = rng.random(n) < 0.5
        y_up = rng.uniform(0.0, 1.0, n) * (ft - gamma * delta)
        y_dn = gamma * delta + rng.uniform(0.0, 1.0, n) * (fx - gamma
                                                           * delta)
        y = np.where(up, y_up, y_dn)
        t2 = np.where(up, y + gamma * delta, y - gamma * delta)
        b = np.exp(rng.uniform(np.log(1 / 3.0), np.log(3.0), n))
    elif branch == "VD":
        x = rng.uniform(-1.0, 0.99, n)
        fx = profile.f_batch(x)
        kind = rng.random(n)          # <0.6 pure vertical, <0.9 slanted, D
        pure = kind < 0.6
        tie = kind >= 0.9
        dxs = np.where(pure, 0.0, rng.uniform(0.0, 1.0, n)
                       * np.minimum(0.4 * fx, 1.0 - x))
        t1 = x + dxs
        ft = profile.f_batch(t1)
        y = np.where(pure, rng.uniform(0.0, 1.0, n) * fx,
                     rng.uniform(0.0, 0.5, n) * fx)
        dy_slant = (1.05 * dxs + rng.uniform(0.0, 1.0, n)
                    * np.maximum(ft - y - 1.05 * dxs, 0.0))
        t2 = np.where(pure, rng.uniform(0.0, 1.0, n) * ft,
                      np.where(tie, np.minimum(y + dxs, ft), y + dy_slant))
        b = np.exp(rng.uniform(np.log(1 / 3.0), np.log(3.0), n))
    else:
        raise DomainError(f"unknown branch {branch!r}")
    a = np.exp(rng.uniform(np.log(1 / 3.0), np.log(3.0), n))
    return x, y, t1, t2, a, b


def jacobi_branch_sweep(profile: Profile, n_per_branch: int, seed: int,
                        kappa: Optional[float] = None) -> dict:
    """Condition margins per pair class, exactly n per branch.

    Samples whose classification disagrees with the requested branch (ties
    at region boundaries) are dropped and redrawn until the branch tally is
    full; drawing is deterministic in the seed.
    """
    out = {}
    want = {"H0": (2,), "H1": (3,), "VD": (0, 1)}
    kap = profile.params.K if kappa is None else float(kappa)
    for i, branch in enumerate(("H0", "H1", "VD")):
        cols = None
        round_ = 0
        while cols is None or cols["margin"].size < n_per_branch:
            x, y, t1, t2, a, b = branch_sample_arrays(
                profile, branch, n_per_branch, seed + 71 * i + 9973 * round_)
            lhs, rhs, br, mx, my = kernels.jacobi_condition(
                x, y, t1, t2, a, b, kap, profile.breaks, profile.c0)
            keep = np.isin(br, want[branch])
            batch = {
                "x": x[keep], "y": y[keep], "t1": t1[keep], "t2": t2[keep],
                "branch": br[keep], "lhs": lhs[keep], "rhs": rhs[keep],
                "margin": (lhs - rhs)[keep],
            }
            if cols is None:
                cols = batch
            else:
                cols = {k: np.concatenate([cols[k], batch[k]])
                        for k in cols}
            round_ += 1
        out[branch] = {k: v[:n_per_branch] for k, v in cols.items()}
    return out


def calibrate_condition_K(profile: Profile, n_per_branch: int = 2000,
                          seed: int = 7, lo: float = 1.0,
                          hi: float = 1e4) -> dict:
    """Smallest Gaussian constant with nonnegative condition margins."""
    cache = {}

    def min_margin(kappa):
        res = jacobi_branch_sweep(profile, n_per_branch, seed, kappa=kappa)
        return min(float(r["margin"].min()) for r in res.values())

    return calibrate_K(min_margin, lo=lo, hi=hi)


def calibrate_lemma_k(eps_ratio: float = 0.1, n: int = 4096,
                      seed: int = 11) -> dict:
    """Largest ladder value k = 0.1 / 2^n whose lemma margins all stay
    nonnegative; eps is tied to k by eps_ratio."""
    trace = []
    chosen = None
    for level in range(1, 13):
        k = 0.1 / (1 << level)
        params = SpaceParams(k=k, K=1.0, epsilon=eps_ratio * k)
        profile = build_profile(params)
        res = sweeps.run_lemma_sweeps(profile, n, seed)
        worst = min(float(m.min()) for m, _ in res.values())
        trace.append({"k": k, "min_margin": worst})
        if worst >= -1e-9 and chosen is None:
            chosen = k
    return {"k": chosen, "trace": trace}


# ---------------------------------------------------------------------------
# strip measures and the dyadic convexity scenario


def strip_measure(params: SpaceParams, grid, x_lo: float, x_hi: float,
                  profile: Optional[Profile] = None) -> DiscreteMeasure:
    """Normalized restriction of the reference measure to a strip."""
    return discretize(params, lambda x, y: np.ones_like(x), grid,
                      x_range=(x_lo, x_hi), profile=profile)


def strips_transport(params: SpaceParams, grid, shift: float,
                     x_lo: float = STRIP[0], x_hi: float = STRIP[1],
                     profile: Optional[Profile] = None):
    """Strip measure plus the fiber-rescaling transport onto its shift."""
    if profile is None:
        profile = build_profile(params)
    mu0 = strip_measure(params, grid, x_lo, x_hi, profile)
    tmap = analytic_family("horizontal_rescaled", mu0, profile, delta=shift)
    return mu0, tmap


# ---------------------------------------------------------------------------
# scenario driver


@dataclass
class ScenarioConfig:
    scenario: str
    k: float = 0.01
    K: float = 1.0
    eps: float = 0.001
    nx: int = 100
    ny: int = 10
    depth: int = 5
    seed: int = 1234
    out: str = "reports"
    tbar: float = 1.0
    samples: int = 0              # 0 = scenario default
    k_test: float = 0.0

    def params(self) -> SpaceParams:
        return SpaceParams(k=self.k, K=self.K, epsilon=self.eps)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ParameterError(f"unknown config keys: {sorted(bad)}")
        if "scenario" not in d:
            raise ParameterError("config needs a 'scenario' key")
        return cls(**d)


def _gate(name, ok, detail):
    print(f"[{name}] {'PASS' if ok else 'FAIL'} {detail}")
    return {"gate": name, "pass": bool(ok), "detail": detail}


def profile_d1(profile: Profile, x: float) -> float:
    from .geometry import profile_eval
    return profile_eval(profile, x)[1]


def scenario_profile(cfg: ScenarioConfig) -> tuple:
    params = cfg.params()
    profile = build_profile(params)
    out = Path(cfg.out)
    reports.write_json(out / "profile.json", profile.as_dict())

    from scipy import integrate as si
    k = params.k

    def phi(x):
        return 0.75 * (1.0 - (x / k) ** 2) if abs(x) <= k else 0.0

    def f1_quad(x):
        v, _ = si.quad(phi, -1.0, x, points=[-k, k], limit=200)
        return v

    def f_quad(x):
        v, _ = si.quad(f1_quad, -1.0, x, points=[-k, k], limit=200)
        return params.epsilon + v

    gates = []
    checks = [
        ("f(-1)", profile.f(-1.0), params.epsilon),
        ("f'(-1)", profile_d1(profile, -1.0), 0.0),
        ("f(k)", profile.f(k), f_quad(k)),
        ("f(1)", profile.f(1.0), f_quad(1.0)),
    ]
    for name, got, want in checks:
        err = abs(got - want)
        gates.append(_gate(f"profile:{name}", err <= 1e-12,
                           f"got={got!r} want={want!r} err={err:.2e}"))
    xs = np.linspace(-1.0, 1.0, 200_001)
    fmax = float(profile.f_batch(xs).max())
    gates.append(_gate("profile:f<3k", fmax < 3.0 * k,
                       f"max f={fmax!r} 3k={3.0 * k!r}"))
    reports.write_json(out / "profile_gates.json", gates)
    return gates, [out / "profile.json", out / "profile_gates.json"]


def scenario_lemmas(cfg: ScenarioConfig) -> tuple:
    params = cfg.params()
    profile = build_profile(params)
    n = cfg.samples or (1 << 16)
    res = sweeps.run_lemma_sweeps(profile, n, cfg.seed)
    out = Path(cfg.out)
    gates = []
    rows_cap = 1 << 16          # full dump up to 2^16 points per report
    for name in sorted(res):
        margins, echo = res[name]
        worst = float(margins.min())
        gates.append(_gate(f"lemma:{name}", worst >= -1e-9,
                           f"n={margins.size} min_margin={worst!r}"))
        keys = sorted(echo)
        header = ["lemma"] + keys + ["margin", "pass"]
        rows = []
        for i in range(min(rows_cap, margins.size)):
            rows.append([name] + [echo[k][i] for k in keys]
                        + [float(margins[i]), margins[i] >= -1e-9])
        reports.write_csv(out / f"lemma_{name}.csv", header, rows)
    reports.write_json(out / "lemma_gates.json", gates)
    return gates, sorted(out.glob("lemma_*.csv")) + [out / "lemma_gates.json"]


def scenario_midpoint(cfg: ScenarioConfig) -> tuple:
    params = cfg.params()
    profile = build_profile(params)
    n = cfg.samples or (1 << 15)
    dev, echo = sweeps.sweep_midpoint_certificate(profile, n, cfg.seed)
    bound = injectivity_derivative_bound(params.k)
    gates = [
        _gate("midpoint:certificate", float(dev.max()) <= 1e-9,
              f"n={n} max_deviation={float(dev.max())!r}"),
        _gate("midpoint:injectivity_bound", bound > 0.43,
              f"bound={bound!r}"),
    ]
    out = Path(cfg.out)
    reports.write_json(out / "midpoint_gates.json", gates)
    return gates, [out / "midpoint_gates.json"]


def scenario_transport(cfg: ScenarioConfig) -> tuple:
    from .oracle import run_oracle_corpus
    params = cfg.params()
    profile = build_profile(params)
    n_inst = cfg.samples or 50
    res = run_oracle_corpus(profile, n_instances=n_inst, seed=cfg.seed)
    gates = [
        _gate("transport:oracle_equivalence",
              res["mismatches"] == 0,
              f"instances={res['instances']} mismatches={res['mismatches']}"),
        _gate("transport:cyclical_monotonicity",
              res["monotonicity_violations"] == 0,
              f"violations={res['monotonicity_violations']}"),
    ]
    from .measures import check_cyclical_monotonicity
    from .transport import solve_structured, verify_map_properties
    mu0 = strip_measure(params, (12, 4), -0.6, -0.45, profile)
    mu1 = strip_measure(params, (12, 4), -0.3, -0.15, profile)
    plan, tmap = solve_structured(mu0, mu1, profile)
    prop = verify_map_properties(tmap)
    mono = check_cyclical_monotonicity(plan, 4000, cfg.seed)
    gates.append(_gate("transport:structured_properties",
                       all(p["pass"] for p in prop),
                       "; ".join(f"{p['property']}={p['worst_violation']:.2e}"
                                 for p in prop)))
    gates.append(_gate("transport:structured_monotonicity",
                       mono["violations"] == 0,
                       f"violations={mono['violations']}"))
    out = Path(cfg.out)
    reports.write_json(out / "transport_properties.json", prop)
    reports.write_json(out / "transport_gates.json", gates)
    return gates, [out / "transport_properties.json",
                   out / "transport_gates.json"]


def scenario_cd_check(cfg: ScenarioConfig) -> tuple:
    params = cfg.params()
    profile = build_profile(params)
    n = cfg.samples or 10_000
    cal = calibrate_condition_K(profile, n_per_branch=max(n // 5, 500),
                                seed=cfg.seed)
    kappa = cal["K"]
    res = jacobi_branch_sweep(profile, n, cfg.seed, kappa=kappa)
    out = Path(cfg.out)
    gates = [_gate("cd:calibration", cal["converged"],
                   f"K={kappa!r} probes={len(cal['trace'])}")]
    rows = []
    for branch in sorted(res):
        r = res[branch]
        worst = float(r["margin"].min())
        gates.append(_gate(f"cd:condition_{branch}", worst >= 0.0,
                           f"n={r['margin'].size} min_margin={worst!r}"))
        cap = 2048
        for i in range(min(cap, r["margin"].size)):
            rows.append([float(r["x"][i]), float(r["y"][i]),
                         int(r["branch"][i]), float(r["lhs"][i]),
                         float(r["rhs"][i]), float(r["margin"][i])])
    reports.write_csv(out / "condition_sweep.csv",
                      ["x", "y", "branch", "lhs", "rhs", "margin"], rows)

    mu0, tmap = strips_transport(params, (cfg.nx, cfg.ny), 1.0,
                                 profile=profile)
    fam = build_dyadic_geodesic(mu0, tmap, cfg.depth, profile)
    conv = k_convexity_report(fam, cfg.k_test)
    worst = max(r["margin"] for r in conv)
    gates.append(_gate("cd:dyadic_convexity", worst <= 5e-3,
                       f"depth={cfg.depth} worst_margin={worst!r}"))
    reports.write_csv(out / "convexity_report.csv",
                      ["t", "entropy", "bound", "margin"],
                      [[r["t"], r["entropy"], r["bound"], r["margin"]]
                       for r in conv])
    reports.write_json(out / "cd_gates.json",
                       {"gates": gates, "calibrated_K": kappa,
                        "vd_case": "reconstructed symmetric product "
                                   "inequality, not a quoted formula"})
    return gates, [out / "condition_sweep.csv",
                   out / "convexity_report.csv", out / "cd_gates.json"]


def scenario_mgh(cfg: ScenarioConfig) -> tuple:
    base = cfg.params()
    gates = []
    results = []
    n = cfg.samples or 100_000
    for div in (2, 4, 8):
        eps_n = base.k / div
        params = SpaceParams(k=base.k, K=base.K, epsilon=eps_n)
        r = mgh_check(params, n_pairs=n, seed=cfg.seed)
        results.append(r)
        gates.append(_gate(f"mgh:distortion_eps_k/{div}",
                           r["max_distortion"] <= r["distortion_bound"],
                           f"max={r['max_distortion']!r} "
                           f"bound={r['distortion_bound']!r}"))
        gates.append(_gate(f"mgh:pushforward_eps_k/{div}",
                           r["pushforward_rel_error"] <= 1e-9,
                           f"rel_err={r['pushforward_rel_error']!r}"))
    out = Path(cfg.out)
    reports.write_json(out / "mgh_report.json",
                       {"results": results, "gates": gates})
    return gates, [out / "mgh_report.json"]


def scenario_counterexample(cfg: ScenarioConfig) -> tuple:
    params = SpaceParams(k=cfg.k, K=cfg.K, epsilon=0.0)
    rep = counterexample_run(params, (cfg.nx, cfg.ny), tbar=cfg.tbar)
    target_violation = float(np.log(rep.c_k / rep.c_k_prime))
    gates = [
        _gate("counterexample:ent_mu0",
              abs(rep.ent_mu0 - rep.ent_mu0_target) <= 5e-3,
              f"got={rep.ent_mu0!r} target={rep.ent_mu0_target!r}"),
        _gate("counterexample:ent_tbar",
              abs(rep.ent_tbar_weighted - rep.ent_tbar_target) <= 5e-3,
              f"got={rep.ent_tbar_weighted!r} "
              f"target={rep.ent_tbar_target!r}"),
        _gate("counterexample:violation",
              abs(rep.violation_magnitude - target_violation) <= 1e-2,
              f"got={rep.violation_magnitude!r} "
              f"target={target_violation!r}"),
        _gate("counterexample:verdict",
              rep.verdict == "strict-CD-violated", rep.verdict),
    ]
    out = Path(cfg.out)
    reports.write_json(out / "counterexample.json", asdict(rep))
    reports.write_json(out / "counterexample_gates.json", gates)
    return gates, [out / "counterexample.json",
                   out / "counterexample_gates.json"]


def scenario_calibrate(cfg: ScenarioConfig) -> tuple:
    params = cfg.params()
    profile = build_profile(params)
    cal_k = calibrate_condition_K(profile,
                                  n_per_branch=(cfg.samples or 2000),
                                  seed=cfg.seed)
    cal_lemma = calibrate_lemma_k(eps_ratio=cfg.eps / cfg.k,
                                  n=(cfg.samples or 4096), seed=cfg.seed)
    gates = [
        _gate("calibrate:condition_K", cal_k["converged"],
              f"K={cal_k['K']!r}"),
        _gate("calibrate:lemma_k", cal_lemma["k"] is not None,
              f"k={cal_lemma['k']!r}"),
    ]
    out = Path(cfg.out)
    reports.write_json(out / "calibration.json",
                       {"condition_K": cal_k, "lemma_k": cal_lemma,
                        "operating_point": {"k": cfg.k, "eps": cfg.eps}})
    return gates, [out / "calibration.json"]


SCENARIOS = {
    "profile": scenario_profile,
    "lemmas": scenario_lemmas,
    "transport": scenario_transport,
    "midpoint": scenario_midpoint,
    "cd-check": scenario_cd_check,
    "mgh": scenario_mgh,
    "counterexample": scenario_counterexample,
    "calibrate": scenario_calibrate,
}


def run_scenario(cfg: ScenarioConfig) -> int:
    """Dispatch a scenario; 0 = all gates pass, 1 = gate failure,
    2 = configuration error."""
    try:
        if cfg.scenario not in SCENARIOS:
            raise ParameterError(f"unknown scenario {cfg.scenario!r}; "
                                 f"choose from {sorted(SCENARIOS)}")
        cfg.params()
        t0 = time.time()
        gates, artifacts = SCENARIOS[cfg.scenario](cfg)
        dt = time.time() - t0
    except (ParameterError, DomainError) as exc:
        print(f"config error: {exc}")
        return 2
    n_fail = sum(1 for g in gates if not g["pass"])
    print(f"scenario={cfg.scenario} backend={BACKEND} gates={len(gates)} "
          f"failures={n_fail} elapsed={dt:.1f}s")
    for a in artifacts:
        print(f"wrote {a}")
    return 0 if n_fail == 0 else 1
