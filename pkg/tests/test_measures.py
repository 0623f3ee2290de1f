import json

import numpy as np
import pytest

from branchcd.errors import DomainError
from branchcd.geometry import Point, c_constant, dist_inf, gaussian_mass
from branchcd.measures import (DiscreteMeasure, check_cyclical_monotonicity,
                               discretize, entropy, wasserstein)


def uniform_rho(x, y):
    return np.ones_like(x)


def dirac(profile, x, y):
    return DiscreteMeasure(x=np.array([x]), y=np.array([y]),
                           w=np.array([1.0]), cell_mass=np.array([1.0]),
                           eps_tag=profile.params.epsilon,
                           singular=np.array([False]))


def random_measure(profile, n, rng):
    x = rng.uniform(-1, 1, n)
    y = rng.uniform(0, 1, n) * profile.f_batch(x)
    w = rng.uniform(0.1, 1.0, n)
    w /= w.sum()
    return DiscreteMeasure(x=x, y=y, w=w, cell_mass=np.ones(n),
                           eps_tag=profile.params.epsilon,
                           singular=np.zeros(n, dtype=bool))


def test_discretize_fiber_weights_follow_gaussian(params, profile):
    mu = discretize(params, uniform_rho, (4, 16), x_range=(-0.6, -0.5),
                    profile=profile)
    sel = mu.ix == 2
    w = mu.w[sel]
    u_edges = np.linspace(0, 1, 17)
    expected = gaussian_mass(params.K, u_edges[:-1], u_edges[1:])
    assert np.allclose(w / w[0], expected / expected[0], rtol=1e-12)


def test_discretize_single_atom(params, profile):
    mu = discretize(params, uniform_rho, (1, 1), x_range=(-0.5, -0.4),
                    profile=profile)
    assert len(mu) == 1
    assert mu.w[0] == 1.0


def test_discretize_strip_total_and_entropy(params, profile):
    mu = discretize(params, uniform_rho, (50, 10), x_range=(-0.5, -0.25),
                    profile=profile)
    mu.validate()
    ck = c_constant(params.K)
    assert entropy(mu, params) == pytest.approx(-np.log(ck * 0.25),
                                                abs=1e-12)


def test_counterexample_strip_entropy_on_limit_space(params0, profile0):
    mu = discretize(params0, uniform_rho, (50, 10), x_range=(-0.5, -0.25),
                    profile=profile0)
    assert np.all(mu.singular)
    ck = c_constant(params0.K)
    assert entropy(mu, params0) == pytest.approx(np.log(4.0 / ck), abs=1e-12)
    assert entropy(mu, params0) == pytest.approx(1.6783, abs=5e-4)


def test_entropy_jensen_lower_bound(params, profile):
    # Ent >= -log m(X) for any probability density
    m_total = 2.0 * c_constant(params.K)
    rng = np.random.default_rng(8)
    for _ in range(5):
        a, b = sorted(rng.uniform(-1, 1, 2))
        if b - a < 0.05:
            continue
        mu = discretize(params, lambda x, y: 1.0 + 0.5 * np.sin(7 * x + y),
                        (30, 6), x_range=(a, b), profile=profile)
        assert entropy(mu, params) >= -np.log(m_total) - 1e-12


def test_wasserstein_identity(params, profile):
    mu = discretize(params, uniform_rho, (6, 4), x_range=(-0.5, -0.3),
                    profile=profile)
    val, plan = wasserstein(mu, mu)
    assert val == 0.0
    assert np.all(plan.src == plan.tgt)


def test_wasserstein_two_diracs(profile):
    p, q = Point(-0.3, 0.0), Point(0.2, 0.0005)
    val, plan = wasserstein(dirac(profile, *p), dirac(profile, *q))
    assert val == pytest.approx(dist_inf(p, q) ** 2, rel=1e-12)
    assert len(plan) == 1


def test_wasserstein_translated_strip(params, profile):
    mu0 = discretize(params, uniform_rho, (20, 5), x_range=(-0.5, -0.25),
                     profile=profile)
    mu1 = discretize(params, uniform_rho, (20, 5), x_range=(-0.3, -0.05),
                     profile=profile)
    val, plan = wasserstein(mu0, mu1)
    assert val == pytest.approx(0.04, abs=1e-10)
    assert plan.marginal_error(mu0, mu1) < 1e-10


def test_wasserstein_symmetry(profile):
    rng = np.random.default_rng(5)
    mu = random_measure(profile, 9, rng)
    nu = random_measure(profile, 7, rng)
    v1, _ = wasserstein(mu, nu)
    v2, _ = wasserstein(nu, mu)
    assert v1 == pytest.approx(v2, abs=1e-10)


def test_wasserstein_triangle_inequality(profile):
    rng = np.random.default_rng(17)
    for _ in range(100):
        mu = random_measure(profile, 6, rng)
        nu = random_measure(profile, 6, rng)
        rho = random_measure(profile, 6, rng)
        d01 = np.sqrt(wasserstein(mu, nu)[0])
        d12 = np.sqrt(wasserstein(nu, rho)[0])
        d02 = np.sqrt(wasserstein(mu, rho)[0])
        assert d02 <= d01 + d12 + 1e-8


def test_monotonicity_diagonal_plan(params, profile):
    mu = discretize(params, uniform_rho, (5, 4), x_range=(-0.5, -0.3),
                    profile=profile)
    _, plan = wasserstein(mu, mu)
    rep = check_cyclical_monotonicity(plan, 2000, seed=0)
    assert rep["violations"] == 0


def test_monotonicity_optimal_plan(profile):
    rng = np.random.default_rng(23)
    mu = random_measure(profile, 12, rng)
    nu = random_measure(profile, 12, rng)
    _, plan = wasserstein(mu, nu)
    rep = check_cyclical_monotonicity(plan, 5000, seed=1)
    assert rep["violations"] == 0
    assert rep["worst_margin"] >= -1e-9


def test_monotonicity_detects_swap(params, profile):
    # crossing two flat-region couplings must violate pair monotonicity
    mu0 = discretize(params, uniform_rho, (2, 1), x_range=(-0.9, -0.7),
                     profile=profile)
    mu1 = discretize(params, uniform_rho, (2, 1), x_range=(-0.5, -0.3),
                     profile=profile)
    _, plan = wasserstein(mu0, mu1)
    swapped = plan
    swapped.tgt = plan.tgt[::-1].copy()
    swapped.tgt_xy = plan.tgt_xy[::-1].copy()
    rep = check_cyclical_monotonicity(swapped, 2000, seed=2)
    assert rep["violations"] > 0


def test_measure_json_roundtrip_bit_exact(params, profile, tmp_path):
    mu = discretize(params, lambda x, y: 1.0 + 0.3 * np.cos(3 * x),
                    (7, 5), x_range=(-0.8, -0.2), profile=profile)
    d = mu.to_json_dict()
    path = tmp_path / "measure.json"
    path.write_text(json.dumps(d))
    back = DiscreteMeasure.from_json_dict(json.loads(path.read_text()))
    assert np.array_equal(back.x, mu.x)
    assert np.array_equal(back.y, mu.y)
    assert np.array_equal(back.w, mu.w)
    assert np.array_equal(back.cell_mass, mu.cell_mass)
    assert back.eps_tag == mu.eps_tag


def test_plan_csv_roundtrip_bit_exact(profile, tmp_path):
    from branchcd.measures import load_plan_entries, save_plan
    rng = np.random.default_rng(31)
    mu = random_measure(profile, 5, rng)
    nu = random_measure(profile, 5, rng)
    _, plan = wasserstein(mu, nu)
    path = tmp_path / "plan.csv"
    save_plan(path, plan)
    src, tgt, mass, cost = load_plan_entries(path)
    assert np.array_equal(src, plan.src)
    assert np.array_equal(tgt, plan.tgt)
    assert np.array_equal(mass, plan.mass)
    assert np.array_equal(cost, plan.cost)


def test_measure_save_load_file(params, profile, tmp_path):
    from branchcd.measures import load_measure, save_measure
    mu = discretize(params, uniform_rho, (5, 3), x_range=(-0.7, -0.4),
                    profile=profile)
    save_measure(tmp_path / "mu.json", mu)
    back = load_measure(tmp_path / "mu.json")
    assert np.array_equal(back.w, mu.w)
    assert np.array_equal(back.x, mu.x)


def test_w2_grid_refinement_monitor(params, profile):
    # convergence monitor, not a hard gate: refinement moves the value by
    # no more than a multiple of the cell size
    vals = {}
    for n in (6, 12):
        mu0 = discretize(params, uniform_rho, (n, 3),
                         x_range=(-0.5, -0.25), profile=profile)
        mu1 = discretize(params, uniform_rho, (n, 3),
                         x_range=(-0.2, 0.05), profile=profile)
        vals[n], _ = wasserstein(mu0, mu1)
    h = 0.25 / 6
    assert abs(vals[12] - vals[6]) < 10.0 * h
    assert vals[12] == pytest.approx(0.09, abs=1e-6)


def test_infeasible_mass_rejected(profile):
    rng = np.random.default_rng(2)
    mu = random_measure(profile, 4, rng)
    nu = random_measure(profile, 4, rng)
    nu.w = nu.w * 0.5
    with pytest.raises(DomainError):
        wasserstein(mu, nu)
