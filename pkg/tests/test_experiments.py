import numpy as np
import pytest

from branchcd.errors import DomainError, ParameterError
from branchcd.geometry import SpaceParams, c_constant
from branchcd.measures import discretize
from branchcd.experiments import (ScenarioConfig,
                                  counterexample_run, eta_construct,
                                  mgh_check, mixing_kernel, run_scenario,
                                  _canonical_plan, calibrate_condition_K)


def test_mgh_distortion_within_bound(params):
    for div in (2, 4, 8):
        p = SpaceParams(k=params.k, K=params.K, epsilon=params.k / div)
        r = mgh_check(p, n_pairs=50_000, seed=1)
        assert r["max_distortion"] <= r["distortion_bound"]
        assert r["pushforward_rel_error"] <= 1e-9


def test_mgh_requires_positive_eps(params0):
    with pytest.raises(ParameterError):
        mgh_check(params0, n_pairs=10)


def test_eta_snapshots_match_discretized_strip(params0, profile0):
    fam = eta_construct(params0, (40, 8), depth=3)
    for j, t in enumerate(fam.times):
        mu_t = discretize(params0, lambda x, y: np.ones_like(x), (40, 8),
                          x_range=(-0.5 + t, -0.25 + t), profile=profile0)
        pts = fam.points[:, j, :]
        w = fam.weights
        # aggregate path weights per snapshot cell and compare
        got = {}
        for (x, y), wi in zip(pts, w):
            key = (round(float(x), 12), round(float(y), 12))
            got[key] = got.get(key, 0.0) + wi
        want = {}
        for x, y, wi in zip(mu_t.x, mu_t.y, mu_t.w):
            key = (round(float(x), 12), round(float(y), 12))
            want[key] = want.get(key, 0.0) + wi
        assert set(got) == set(want)
        for key in got:
            assert got[key] == pytest.approx(want[key], abs=1e-9)


def test_eta_paths_are_unit_speed(params0):
    fam = eta_construct(params0, (30, 6), depth=4)
    sp = fam.speeds()
    dt = 1.0 / 16.0
    assert np.max(np.abs(sp - dt)) < 1e-12


def test_eta_zero_level_rides_the_segment(params0, profile0):
    plan = _canonical_plan(params0, (20, 4), profile0)
    x, y = plan.point_arrays(0.2)
    assert np.all(y[:, 0] <= plan.u[0] * profile0.f_batch(plan.x0 + 0.2))
    x, y = plan.point_arrays(0.1)      # strip still inside the segment
    assert np.allclose(y, 0.0)


def test_counterexample_closed_form_values(params0):
    rep = counterexample_run(params0, (200, 20))
    ck = c_constant(1.0)
    ckp = c_constant(1.0, 0.5)
    assert rep.ent_mu0 == pytest.approx(np.log(4 / ck), abs=5e-3)
    assert rep.ent_mu0 == pytest.approx(1.6783, abs=5e-3)
    assert rep.ent_tbar_weighted == pytest.approx(np.log(4 / ckp), abs=5e-3)
    assert rep.ent_tbar_weighted == pytest.approx(2.1601, abs=5e-3)
    assert rep.violation_magnitude == pytest.approx(0.4819, abs=1e-2)
    assert rep.verdict == "strict-CD-violated"
    assert rep.entropy_difference == pytest.approx(np.log(ck / ckp),
                                                   abs=1e-2)


def test_counterexample_interior_margins_positive(params0):
    rep = counterexample_run(params0, (100, 10))
    plateau = [m for t, m in rep.margins_selected if 0.55 <= t < 1.0]
    assert plateau
    for (t, m) in rep.margins_selected:
        if 0.55 <= t < 1.0:
            expected = (1 - t) * np.log(rep.c_k / rep.c_k_prime)
            assert m == pytest.approx(expected, abs=1e-9)


def test_counterexample_fpath_cases(params0):
    full = counterexample_run(params0, (100, 20), alpha=1.0)
    assert full.fpath["case"] == "reweighted"
    assert full.fpath["margin"] == pytest.approx(0.4818, abs=1e-3)
    assert full.fpath["integral_lhs"] > full.fpath["integral_rhs"]
    ident = counterexample_run(params0, (100, 20), alpha=0.0)
    assert ident.fpath["case"] == "uniform-support"
    assert ident.fpath["margin"] == pytest.approx(
        0.25 * np.log(ident.c_k / ident.c_k_prime), abs=1e-9)
    part = counterexample_run(params0, (100, 20), alpha=0.5)
    assert part.fpath["case"] == "reweighted"
    assert part.fpath["ent_tbar"] >= part.ent_tbar_target - 1e-9
    assert part.fpath["ent1"] < part.ent_tbar_target


def test_counterexample_refinement_convergence(params0):
    target = None
    errs = []
    for grid in ((50, 6), (100, 12), (200, 24)):
        rep = counterexample_run(params0, grid)
        target = np.log(rep.c_k / rep.c_k_prime)
        errs.append(abs(rep.violation_magnitude - target))
    assert errs[2] <= errs[0] + 1e-12


def test_counterexample_validation(params0, params):
    with pytest.raises(DomainError):
        counterexample_run(params0, (100, 10), tbar=0.3)
    with pytest.raises(ParameterError):
        counterexample_run(params, (100, 10))
    with pytest.raises(DomainError):
        counterexample_run(params0, (10, 10))


def test_mixing_kernel_preserves_marginal(params0, profile0):
    plan = _canonical_plan(params0, (20, 8), profile0)
    for alpha in (0.0, 0.3, 1.0):
        P = mixing_kernel(plan, alpha)
        assert np.max(np.abs(plan.wu @ P - plan.wu)) < 1e-15
    bad = np.eye(8)
    bad[0, 0] = 0.5
    with pytest.raises(DomainError):
        counterexample_run(params0, (20, 8), mixing=bad)


def test_calibration_terminates(profile):
    cal = calibrate_condition_K(profile, n_per_branch=800, seed=5)
    assert cal["converged"]
    assert 1.0 <= cal["K"] <= 1e4


def test_scenario_config_validation():
    with pytest.raises(ParameterError):
        ScenarioConfig.from_dict({"scenario": "profile", "bogus": 1})
    with pytest.raises(ParameterError):
        ScenarioConfig.from_dict({})
    cfg = ScenarioConfig.from_dict({"scenario": "profile", "k": 0.02})
    assert cfg.k == 0.02


def test_run_scenario_exit_codes(tmp_path):
    cfg = ScenarioConfig(scenario="profile", out=str(tmp_path / "a"))
    assert run_scenario(cfg) == 0
    bad = ScenarioConfig(scenario="nope", out=str(tmp_path / "b"))
    assert run_scenario(bad) == 2
    badk = ScenarioConfig(scenario="profile", k=0.7,
                          out=str(tmp_path / "c"))
    assert run_scenario(badk) == 2


def test_reports_deterministic(tmp_path):
    outs = []
    for run in ("r1", "r2"):
        out = tmp_path / run
        cfg = ScenarioConfig(scenario="lemmas", samples=2048, seed=99,
                             out=str(out))
        assert run_scenario(cfg) == 0
        outs.append(out)
    for name in sorted(p.name for p in outs[0].iterdir()):
        b1 = (outs[0] / name).read_bytes()
        b2 = (outs[1] / name).read_bytes()
        assert b1 == b2, name
