"""Deterministic sample sweeps for the inequality margins.

Sobol sequences (scrambled, fixed seed) drive the lemma sweeps; plain
generator draws drive the midpoint certificate and condition sweeps.  Every
sampler maps the unit cube into the admissible domain of its inequality, so
margin evaluators never raise on swept inputs.
"""

from typing import Tuple

import numpy as np
from scipy.stats import qmc

from . import lemmas
from .geometry import Profile
from .midpoint import certify_batch

__all__ = [
    "sobol", "sweep_log_inequality", "sweep_gamma_bounds",
    "sweep_midpoint_convexity", "sweep_ratio_bound",
    "sweep_midpoint_certificate", "sample_in_space_pairs",
    "LEMMA_SWEEPS",
]

CURVE_H = 5.0          # curvature budget matching the interpolation bound


def sobol(dim: int, n: int, seed: int) -> np.ndarray:
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = max(int(np.ceil(np.log2(max(n, 1)))), 0)
    return sampler.random_base2(m)[:n]


def sweep_log_inequality(profile: Profile, n: int, seed: int):
    """A log-uniform over [1e-3, 1e3], delta uniform inside (-1/32, 1/32)."""
    s = sobol(2, n, seed)
    A = np.exp(np.log(1e-3) + s[:, 0] * (np.log(1e3) - np.log(1e-3)))
    delta = (2.0 * s[:, 1] - 1.0) * (1.0 / 32.0 - 1e-9)
    margin = lemmas.log_inequality_margin_batch(A, delta)
    return margin, {"A": A, "delta": delta}


def sweep_gamma_bounds(profile: Profile, n: int, seed: int):
    """In-space pairs with distinct abscissae plus a curve parameter."""
    s = sobol(5, n, seed)
    x0 = -1.0 + s[:, 0] * 1.9
    dx = 1e-4 + s[:, 1] * (1.0 - x0 - 1e-4)
    x1 = x0 + dx
    f0 = profile.f_batch(x0)
    f1 = profile.f_batch(x1)
    y0 = s[:, 2] * f0
    y1 = s[:, 3] * f1
    t = s[:, 4]
    m1, m2 = lemmas.gamma_bound_margins_batch(x0, y0, x1, y1, t, profile)
    echo = {"x0": x0, "y0": y0, "x1": x1, "y1": y1, "t": t}
    return m1, m2, echo


def _curve_params(profile: Profile, n: int, seed: int):
    """Admissible steep-curve parameters: lines with slope in [1/4, 1] and
    blends of the interpolation curve with the unit-slope line."""
    s = sobol(5, n, seed)
    kind_line = s[:, 4] < 0.5
    x1 = -0.9 + s[:, 0] * 1.9
    f1 = profile.f_batch(x1)
    slope = np.where(kind_line, 0.25 + 0.75 * s[:, 3], 1.0)
    lam = np.where(kind_line, 0.0, s[:, 3])
    s_eff = np.where(kind_line, slope, 0.5 * (1.0 + lam))
    dx_max = np.minimum(0.9 * f1 / np.maximum(s_eff, 0.25), x1 + 1.0)
    dx = dx_max * (0.05 + 0.95 * s[:, 1])
    x0 = x1 - dx
    y0 = s[:, 2] * 0.95 * (f1 - s_eff * dx)
    return x0, x1, y0, kind_line, slope, lam


def sweep_midpoint_convexity(profile: Profile, n: int, seed: int):
    """Lemma and corollary midpoint margins over an admissible curve batch."""
    x0, x1, y0, kind_line, slope, lam = _curve_params(profile, n, seed)
    m_log, m_sq = lemmas.convexity_margins_vectorized(
        x0, x1, y0, kind_line, slope, lam, profile)
    echo = {"x0": x0, "x1": x1, "y0": y0,
            "kind": np.where(kind_line, "line", "blend"),
            "slope": slope, "lam": lam}
    return m_log, m_sq, echo


def sweep_ratio_bound(profile: Profile, n: int, seed: int):
    s = sobol(2, n, seed)
    x = -1.0 + 1e-6 + s[:, 0] * (2.0 - 2e-6)
    dmax = np.minimum(1.0 - x, x + 1.0)
    delta = 1e-9 + s[:, 1] * (dmax - 1e-9)
    margin = lemmas.ratio_bound_margin_batch(x, delta, profile)
    return margin, {"x": x, "delta": delta}


def sample_in_space_pairs(profile: Profile, n: int,
                          seed: int) -> Tuple[np.ndarray, ...]:
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-1.0, 1.0, n)
    x1 = rng.uniform(-1.0, 1.0, n)
    y0 = rng.uniform(0.0, 1.0, n) * profile.f_batch(x0)
    y1 = rng.uniform(0.0, 1.0, n) * profile.f_batch(x1)
    return x0, y0, x1, y1


def sweep_midpoint_certificate(profile: Profile, n: int, seed: int):
    """Midpoint-distance deviations over random in-space pairs."""
    x0, y0, x1, y1 = sample_in_space_pairs(profile, n, seed)
    dev0, dev1 = certify_batch(x0, y0, x1, y1, profile)
    return np.maximum(dev0, dev1), {"x0": x0, "y0": y0, "x1": x1, "y1": y1}


def _run_log_inequality(profile, n, seed):
    m, echo = sweep_log_inequality(profile, n, seed)
    return {"log_inequality": (m, echo)}


def _run_gamma(profile, n, seed):
    m1, m2, echo = sweep_gamma_bounds(profile, n, seed)
    return {"interpolation_slope": (m1, echo),
            "interpolation_curvature": (m2, echo)}


def _run_convexity(profile, n, seed):
    m_log, m_sq, echo = sweep_midpoint_convexity(profile, n, seed)
    return {"midpoint_log_density": (m_log, echo),
            "midpoint_ratio_convexity": (m_sq, echo)}


def _run_ratio(profile, n, seed):
    m, echo = sweep_ratio_bound(profile, n, seed)
    return {"profile_ratio": (m, echo)}


LEMMA_SWEEPS = {
    "log_inequality": _run_log_inequality,
    "interpolation_bounds": _run_gamma,
    "midpoint_convexity": _run_convexity,
    "profile_ratio": _run_ratio,
}


def run_lemma_sweeps(profile: Profile, n: int, seed: int) -> dict:
    """All lemma margins; returns {name: (margins, input echo)}."""
    out = {}
    for i, (name, fn) in enumerate(sorted(LEMMA_SWEEPS.items())):
        out.update(fn(profile, n, seed + 1000 * i))
    return out
