import numpy as np
import pytest

from branchcd.errors import DomainError, StructuredMapError
from branchcd.measures import (COST_SCALE, check_cyclical_monotonicity,
                               solve_min_cost, _sup_cost_matrix)
from branchcd.oracle import (enumerate_lex_best, random_instance,
                             run_oracle_corpus, solve_instance_exact)
from branchcd.transport import (analytic_family, solve_structured,
                                verify_map_properties, branch_counts)
from branchcd.experiments import strip_measure, strips_transport


def test_identity_solve(params, profile):
    mu = strip_measure(params, (5, 3), -0.5, -0.4, profile)
    plan, tmap = solve_structured(mu, mu, profile)
    assert plan.cost_value == 0.0
    assert np.allclose(tmap.t1, mu.x)
    assert np.allclose(tmap.t2, mu.y)
    assert tmap.split_mass == 0.0


def test_flat_shift_recovers_translation(params, profile):
    mu0 = strip_measure(params, (8, 3), -0.8, -0.6, profile)
    mu1 = strip_measure(params, (8, 3), -0.5, -0.3, profile)
    plan, tmap = solve_structured(mu0, mu1, profile)
    assert np.max(np.abs(tmap.t1 - (mu0.x + 0.3))) < 1e-12
    assert np.max(np.abs(tmap.t2 - mu0.y)) < 1e-12
    assert plan.cost_value == pytest.approx(0.09, abs=1e-10)


def test_structured_matches_analytic_family(params, profile):
    mu0 = strip_measure(params, (10, 4), -0.6, -0.45, profile)
    mu1 = strip_measure(params, (10, 4), -0.2, -0.05, profile)
    plan, tmap = solve_structured(mu0, mu1, profile)
    expected = analytic_family("horizontal_rescaled", mu0, profile,
                               delta=0.4)
    assert np.max(np.abs(tmap.t1 - expected.t1)) < 1e-12
    assert np.max(np.abs(tmap.t2 - expected.t2)) < 1e-12


def test_far_strip_pairs_classified_horizontal(params, profile):
    # horizontal separation beyond 3k forces the horizontal class
    mu0, tmap = strips_transport(params, (10, 4), 0.8, -0.6, -0.5,
                                 profile=profile)
    counts = branch_counts(tmap)
    assert counts["H0"] == len(mu0)


def test_lexicographic_primary_cost_is_stage1_optimum(params, profile):
    rng = np.random.default_rng(4)
    mu, nu = random_instance(profile, 5, rng)
    flow, plan = solve_instance_exact(mu, nu)
    p_int = np.round(_sup_cost_matrix(mu, nu) * COST_SCALE).astype(np.int64)
    stage1_opt, _ = solve_min_cost(mu, nu, p_int, mass_scale=5 << 40)
    assert plan.scaled_optimum == stage1_opt


def test_map_properties_on_identity(params, profile):
    mu = strip_measure(params, (6, 3), -0.5, -0.4, profile)
    _, tmap = solve_structured(mu, mu, profile)
    for prop in verify_map_properties(tmap):
        assert prop["pass"], prop


def test_map_properties_on_structured_strips(params, profile):
    mu0 = strip_measure(params, (12, 4), -0.6, -0.45, profile)
    mu1 = strip_measure(params, (12, 4), -0.3, -0.15, profile)
    plan, tmap = solve_structured(mu0, mu1, profile)
    report = verify_map_properties(tmap)
    assert all(p["pass"] for p in report)
    assert check_cyclical_monotonicity(plan, 3000, seed=9)["violations"] == 0


def test_analytic_families(params, profile):
    mu = strip_measure(params, (6, 4), -0.5, -0.4, profile)
    ident = analytic_family("horizontal_rescaled", mu, profile, delta=0.0)
    assert np.array_equal(ident.t1, mu.x)
    assert np.array_equal(ident.t2, mu.y)
    flat = analytic_family("horizontal_rescaled", mu, profile, delta=0.2)
    assert np.allclose(flat.t2, mu.y)          # constant profile
    assert np.allclose(flat.dt1_dx, 1.0)
    assert np.allclose(flat.dt2_dy, 1.0)
    vert = analytic_family("vertical_monotone", mu, profile, lam=0.5)
    assert branch_counts(vert)["V"] == len(mu)
    assert np.all(vert.dt2_dy > 0)
    diag = analytic_family("diagonal", mu, profile, delta=0.1,
                           delta2=0.00005)
    assert np.allclose(diag.t1, mu.x + 0.1)


def test_analytic_family_rejects_off_space_image(params, profile):
    mu = strip_measure(params, (6, 4), -0.5, -0.4, profile)
    with pytest.raises(DomainError):
        analytic_family("diagonal", mu, profile, delta=1.9)
    with pytest.raises(DomainError):
        analytic_family("diagonal", mu, profile, delta=0.1, delta2=0.5)
    with pytest.raises(DomainError):
        analytic_family("unknown", mu, profile)


def test_split_detection(params, profile):
    # 2 source atoms versus 3 equal targets force genuine splitting
    from branchcd.measures import DiscreteMeasure
    mu = DiscreteMeasure(x=np.array([-0.8, -0.6]), y=np.zeros(2),
                         w=np.array([0.5, 0.5]), cell_mass=np.ones(2),
                         eps_tag=params.epsilon,
                         singular=np.zeros(2, dtype=bool))
    nu = DiscreteMeasure(x=np.array([-0.5, -0.1, 0.4]), y=np.zeros(3),
                         w=np.full(3, 1.0 / 3.0), cell_mass=np.ones(3),
                         eps_tag=params.epsilon,
                         singular=np.zeros(3, dtype=bool))
    with pytest.raises(StructuredMapError):
        solve_structured(mu, nu, profile)


def test_oracle_corpus_small(profile):
    res = run_oracle_corpus(profile, n_instances=40, seed=77)
    assert res["mismatches"] == 0
    assert res["ties"] == 0
    assert res["monotonicity_violations"] == 0


def test_oracle_enumeration_agrees_on_fixed_instance(profile):
    rng = np.random.default_rng(123)
    mu, nu = random_instance(profile, 6, rng)
    flow, plan = solve_instance_exact(mu, nu)
    sigma, best, unique = enumerate_lex_best(mu, nu)
    assert unique
    assert flow == {(i, sigma[i]): 1 << 40 for i in range(6)}


def test_rejects_singular_atoms(params0, profile0):
    mu = strip_measure(params0, (5, 3), -0.5, -0.4, profile0)
    assert np.all(mu.singular)
    with pytest.raises(DomainError):
        solve_structured(mu, mu, profile0)
