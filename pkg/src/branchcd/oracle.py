"""Brute-force oracle for the lexicographic transport solver.

Small equal-weight instances (n source and n target atoms, n <= 6, weight
1/n each) are solved two ways: by the production combined-objective network
simplex, and by exhaustive enumeration of all n! permutation plans in the
same scaled integer arithmetic.  On the equal-weight transportation
polytope the vertices are exactly the permutation plans, so a unique
lexicographic LP optimum must be the lexicographically best permutation;
the comparison is exact, flow unit for flow unit.

Each instance uses mass scale n * 2^40 so the equal weights are exact
integers and every permutation plan is feasible.
"""

from itertools import permutations

import numpy as np

from .geometry import Profile
from .measures import (COST_SCALE, DiscreteMeasure, _plan_from_flow,
                       _sup_cost_matrix, check_cyclical_monotonicity,
                       solve_min_cost)
from .transport import SECONDARY_GUARD

__all__ = ["random_instance", "solve_instance_exact", "enumerate_lex_best",
           "run_oracle_corpus"]


def random_instance(profile: Profile, n: int, rng) -> tuple:
    """Equal-weight atom clouds of size n on each side."""

    def cloud():
        x = rng.uniform(-1.0, 1.0, n)
        y = rng.uniform(0.0, 1.0, n) * profile.f_batch(x)
        w = np.full(n, 1.0 / n)
        return DiscreteMeasure(x=x, y=y, w=w, cell_mass=np.ones(n),
                               eps_tag=profile.params.epsilon,
                               singular=np.zeros(n, dtype=bool))

    return cloud(), cloud()


def _scaled_costs(mu, nu):
    primary = _sup_cost_matrix(mu, nu)
    de2 = ((mu.x[:, None] - nu.x[None, :]) ** 2
           + (mu.y[:, None] - nu.y[None, :]) ** 2)
    p_int = np.round(primary * COST_SCALE).astype(np.int64)
    s_int = np.round(de2 * COST_SCALE).astype(np.int64)
    return primary, p_int, s_int


def solve_instance_exact(mu, nu):
    """Combined-objective exact solve; returns (flow dict, plan)."""
    n = len(mu)
    mass_scale = n << 40
    primary, p_int, s_int = _scaled_costs(mu, nu)
    combined = np.empty(p_int.shape, dtype=object)
    for i in range(p_int.shape[0]):
        for j in range(p_int.shape[1]):
            combined[i, j] = int(p_int[i, j]) * SECONDARY_GUARD \
                + int(s_int[i, j])
    opt, flow = solve_min_cost(mu, nu, combined, mass_scale=mass_scale)
    plan = _plan_from_flow(mu, nu, flow, primary, opt // SECONDARY_GUARD,
                           mass_scale=mass_scale)
    return flow, plan


def enumerate_lex_best(mu, nu):
    """Lexicographically best permutation plan and whether it is unique."""
    n = len(mu)
    _, p_int, s_int = _scaled_costs(mu, nu)
    best = None
    best_sigma = None
    unique = True
    for sigma in permutations(range(n)):
        p = sum(int(p_int[i, sigma[i]]) for i in range(n))
        s = sum(int(s_int[i, sigma[i]]) for i in range(n))
        key = (p, s)
        if best is None or key < best:
            best = key
            best_sigma = sigma
            unique = True
        elif key == best:
            unique = False
    return best_sigma, best, unique


def run_oracle_corpus(profile: Profile, n_instances: int = 200,
                      seed: int = 0) -> dict:
    """Solver-versus-enumeration audit over the random corpus."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    ties = 0
    mono_violations = 0
    details = []
    for idx in range(n_instances):
        n = int(rng.integers(2, 7))
        mu, nu = random_instance(profile, n, rng)
        flow, plan = solve_instance_exact(mu, nu)
        sigma, _, unique = enumerate_lex_best(mu, nu)
        expected = {(i, sigma[i]): 1 << 40 for i in range(n)}
        match = (flow == expected)
        if not unique:
            ties += 1
        if not match:
            mismatches += 1
            details.append({"instance": idx, "n": n, "unique": unique})
        mono = check_cyclical_monotonicity(plan, 500, seed=seed + idx)
        mono_violations += mono["violations"]
    return {
        "instances": n_instances,
        "mismatches": mismatches,
        "ties": ties,
        "monotonicity_violations": mono_violations,
        "details": details,
    }
