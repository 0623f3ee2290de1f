import numpy as np
import pytest

from branchcd.convexity import (build_dyadic_geodesic, calibrate_K,
                                jacobi_condition_margin, jacobi_sweep,
                                k_convexity_report, midpoint_entropy_gap,
                                transport_log_chain, weighted_entropy_gap)
from branchcd.errors import DomainError
from branchcd.geometry import Point
from branchcd.measures import DiscreteMeasure, entropy
from branchcd.transport import TransportMap, analytic_family
from branchcd.experiments import (jacobi_branch_sweep, strip_measure,
                                  strips_transport)


def test_condition_identity_margin_zero(profile):
    p = Point(0.3, 0.002)
    s = jacobi_condition_margin(p, p, (1.0, 1.0), profile)
    assert s.margin == pytest.approx(0.0, abs=1e-14)


def test_condition_flat_shift_margin_zero(profile):
    p = Point(-0.8, 0.0004)
    s = jacobi_condition_margin(p, Point(-0.4, 0.0004), (1.0, 1.0), profile)
    assert s.branch == "H0"
    assert s.margin == pytest.approx(0.0, abs=1e-13)


def test_condition_rejects_nonpositive_partials(profile):
    p = Point(0.3, 0.002)
    with pytest.raises(DomainError):
        jacobi_condition_margin(p, p, (0.0, 1.0), profile)


def test_branch_sweeps_nonnegative_at_K1(profile):
    res = jacobi_branch_sweep(profile, 3000, seed=5)
    for branch, r in res.items():
        assert r["margin"].size > 2500, branch
        assert float(r["margin"].min()) >= 0.0, branch


def test_sweep_on_transport_map(params, profile):
    mu0, tmap = strips_transport(params, (30, 6), 1.0, profile=profile)
    res = jacobi_sweep(tmap, profile)
    assert float(res["margin"].min()) >= -1e-13


def test_calibration_bisection_on_synthetic_threshold():
    # margin model: min margin = K - 7 (monotone); smallest passing K is 7
    res = calibrate_K(lambda K: K - 7.0, lo=1.0, hi=100.0, rel_tol=1e-4)
    assert res["converged"]
    assert res["K"] == pytest.approx(7.0, rel=1e-3)


def test_pointwise_condition_implies_entropy_gap(params, profile):
    # the implication: nonnegative pointwise margins force a nonpositive
    # midpoint entropy gap (here both sides are exact)
    scenarios = [
        strips_transport(params, (40, 8), 1.0, profile=profile),
        strips_transport(params, (40, 8), 0.9, -0.52, -0.27,
                         profile=profile),
    ]
    for mu0, tmap in scenarios:
        margins = jacobi_sweep(tmap, profile)["margin"]
        gap = midpoint_entropy_gap(mu0, tmap, profile)
        if float(margins.min()) >= -1e-12:
            assert gap <= 1e-3


def test_entropy_gap_identity(params, profile):
    mu0 = strip_measure(params, (20, 5), -0.5, -0.25, profile)
    ident = analytic_family("horizontal_rescaled", mu0, profile, delta=0.0)
    assert midpoint_entropy_gap(mu0, ident, profile) == \
        pytest.approx(0.0, abs=1e-12)


def test_entropy_gap_flat_translation(params, profile):
    mu0, tmap = strips_transport(params, (100, 10), 0.2, -0.8, -0.55,
                                 profile=profile)
    assert abs(midpoint_entropy_gap(mu0, tmap, profile)) <= 1e-3


def test_weighted_gap_matches_unweighted_for_unit_f(params, profile):
    mu0, tmap = strips_transport(params, (30, 6), 1.0, profile=profile)
    f = np.ones(len(mu0))
    assert weighted_entropy_gap(mu0, tmap, f, profile) == \
        midpoint_entropy_gap(mu0, tmap, profile)


def test_weighted_gap_indicator_and_fiber(params, profile):
    mu0, tmap = strips_transport(params, (30, 6), 1.0, profile=profile)
    left = np.where(mu0.x < -0.375, 1.0, 0.0)
    left /= np.sum(left * mu0.w)
    assert weighted_entropy_gap(mu0, tmap, left, profile) <= 1e-3
    fiber = np.where(mu0.ix == 7, 1.0, 0.0)
    fiber /= np.sum(fiber * mu0.w)
    assert weighted_entropy_gap(mu0, tmap, fiber, profile) <= 1e-3


def test_weighted_gap_validates_weighting(params, profile):
    mu0, tmap = strips_transport(params, (10, 4), 1.0, profile=profile)
    with pytest.raises(DomainError):
        weighted_entropy_gap(mu0, tmap, np.full(len(mu0), 5.0), profile)
    with pytest.raises(DomainError):
        weighted_entropy_gap(mu0, tmap, -np.ones(len(mu0)), profile)


def test_jacobi_change_of_variables_sanity(params, profile):
    # area densities: rho1(T(p)) * J_T(p) = rho0(p), with rho1 measured
    # from the exact image intervals of the monotone family
    mu0 = strip_measure(params, (200, 20), -0.5, -0.25, profile)
    lam = 0.6
    tmap = analytic_family("vertical_monotone", mu0, profile, lam=lam)
    f = profile.f_batch(mu0.x)
    u_edges = np.linspace(0.0, 1.0, 21)

    def g(u):
        return lam * u + (1 - lam) * u * u

    rho0_area = mu0.w / (mu0.dx * (np.diff(u_edges)[mu0.iy] * f))
    img_lo = g(u_edges[mu0.iy]) * f
    img_hi = g(u_edges[mu0.iy + 1]) * f
    rho1_area = mu0.w / (mu0.dx * (img_hi - img_lo))
    jt = tmap.dt1_dx * tmap.dt2_dy
    rel = np.abs(rho1_area * jt - rho0_area) / rho0_area
    assert float(rel.max()) <= 1e-4


def test_dyadic_depth0_and_1(params, profile):
    mu0, tmap = strips_transport(params, (20, 5), 1.0, profile=profile)
    fam0 = build_dyadic_geodesic(mu0, tmap, 0, profile)
    assert fam0.n_times == 2
    assert np.allclose(fam0.points[:, 0, 0], mu0.x)
    assert np.allclose(fam0.points[:, 1, 0], tmap.t1)
    fam1 = build_dyadic_geodesic(mu0, tmap, 1, profile)
    assert fam1.n_times == 3
    from branchcd.midpoint import midpoint_batch
    mx, my, _, _ = midpoint_batch(mu0.x, mu0.y, tmap.t1, tmap.t2, profile)
    assert np.max(np.abs(fam1.points[:, 1, 0] - mx)) < 1e-15
    assert np.max(np.abs(fam1.points[:, 1, 1] - my)) < 1e-15


def test_dyadic_nesting(params, profile):
    mu0, tmap = strips_transport(params, (15, 4), 1.0, profile=profile)
    fam3 = build_dyadic_geodesic(mu0, tmap, 3, profile)
    fam4 = build_dyadic_geodesic(mu0, tmap, 4, profile)
    assert np.array_equal(fam3.times, fam4.times[::2])
    assert np.array_equal(fam3.points, fam4.points[:, ::2, :])
    assert np.array_equal(fam3.logrho, fam4.logrho[:, ::2])


def test_dyadic_constant_speed(params, profile):
    mu0, tmap = strips_transport(params, (15, 4), 1.0, profile=profile)
    fam = build_dyadic_geodesic(mu0, tmap, 4, profile)
    sp = fam.speeds()
    d01 = np.maximum(np.abs(tmap.t1 - mu0.x), np.abs(tmap.t2 - mu0.y))
    assert np.max(np.abs(sp * 16 - d01[:, None])) < 1e-9


def test_dyadic_translation_margins_zero(params, profile):
    mu0, tmap = strips_transport(params, (50, 6), 1.0, profile=profile)
    fam = build_dyadic_geodesic(mu0, tmap, 4, profile)
    rows = k_convexity_report(fam, 0.0)
    assert max(abs(r["margin"]) for r in rows) <= 1e-3


def test_k_test_margin_shift_identity(params, profile):
    # changing K_test shifts each margin by exactly t(1-t) dK/2 * W2^2
    mu0, tmap = strips_transport(params, (15, 4), 1.0, profile=profile)
    fam = build_dyadic_geodesic(mu0, tmap, 3, profile)
    r0 = k_convexity_report(fam, 0.0)
    r1 = k_convexity_report(fam, 2.0)
    for a, b in zip(r0, r1):
        t = a["t"]
        shift = t * (1 - t) * 1.0 * fam.w2_squared
        assert b["margin"] - a["margin"] == pytest.approx(shift, abs=1e-12)


def test_dyadic_weighted_family(params, profile):
    mu0, tmap = strips_transport(params, (20, 5), 1.0, profile=profile)
    f = np.where(mu0.x < -0.375, 1.0, 0.0)
    f /= np.sum(f * mu0.w)
    fam = build_dyadic_geodesic(mu0, tmap, 3, profile, weighting=f)
    rows = k_convexity_report(fam, 0.0)
    assert max(r["margin"] for r in rows) <= 1e-3


def test_refinement_lp_crosscheck(params, profile):
    # closed-form refinement couplings are lexicographically optimal
    from branchcd.convexity import verify_refinement_optimality
    mu0, tmap = strips_transport(params, (8, 3), 1.0, profile=profile)
    fam = build_dyadic_geodesic(mu0, tmap, 2, profile)
    for interval in range(fam.n_times - 1):
        assert verify_refinement_optimality(fam, interval, profile)


def test_jacobian_factors_strictly_positive(profile):
    from branchcd.backend import kernels
    from branchcd.experiments import branch_sample_arrays
    for branch in ("H0", "H1", "VD"):
        x, y, t1, t2, a, b = branch_sample_arrays(profile, branch, 4000,
                                                  seed=60)
        ds1, ds2, _, _, _ = kernels.composition_jacobian(
            x, y, t1, t2, a, b, profile.breaks, profile.c0)
        assert np.all(ds1 > 0.0), branch
        assert np.all(ds2 > 0.0), branch


def test_collision_guard_triggers(params, profile):
    # two sources sharing one midpoint must trip the injectivity guard
    mu = DiscreteMeasure(x=np.array([-0.8, -0.6]), y=np.array([0.0, 0.0]),
                         w=np.array([0.5, 0.5]), cell_mass=np.ones(2) * 0.1,
                         eps_tag=params.epsilon,
                         singular=np.zeros(2, dtype=bool), nx=2, ny=1,
                         ix=np.array([0, 1]), iy=np.array([0, 0]), dx=0.2)
    tmap = TransportMap(source=mu, t1=np.array([-0.6, -0.8]),
                        t2=np.array([0.0, 0.0]),
                        dt1_dx=np.ones(2), dt2_dy=np.ones(2),
                        branch=np.array([2, 2]))
    with pytest.raises(DomainError):
        midpoint_entropy_gap(mu, tmap, profile)


def test_entropy_chain_matches_rebinned_entropy(params, profile):
    # low-resolution cross-check of the density chain against re-binning
    mu0, tmap = strips_transport(params, (24, 6), 1.0, profile=profile)
    _, logrho_T, _ = transport_log_chain(tmap, profile)
    ent_chain = float(np.sum(mu0.w * logrho_T))
    target = strip_measure(params, (24, 6), 0.5, 0.75, profile)
    ent_rebin = entropy(target, params)
    assert ent_chain == pytest.approx(ent_rebin, abs=1e-6)
