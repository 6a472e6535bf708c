import numpy as np
import pytest

from pmcfol.ambient import DataFamily, default_perturbation
from pmcfol.geometry import GraphSurface, compute_geometry, schwarzschild_sphere_curvature
from pmcfol.solver import (
    ContinuationError,
    ConvergenceError,
    LinearSolveError,
    NewtonSettings,
    assemble_linearization,
    continuation,
    foliate,
    initial_radius,
    newton_solve,
    quadratic_form,
    spectral_gap,
)
from pmcfol.spectral import coeff_index


def _h(m, r):
    return float(schwarzschild_sphere_curvature(m, r))


def _bumped_sphere(grid, r, eps=0.05, lm=(2, 0)):
    s = GraphSurface.sphere(grid, r)
    c = s.coeffs.copy()
    c[coeff_index(*lm)] += eps * r
    return s.with_coeffs(c)


# initial radius ---------------------------------------------------------


def test_initial_radius_flat_inversion():
    assert initial_radius(0.0, 0.2) == 10.0


def test_initial_radius_round_trip():
    h = _h(2.0, 10.0)
    assert h == pytest.approx(0.1352366, abs=1e-7)
    assert initial_radius(2.0, h) == pytest.approx(10.0, rel=1e-12)


def test_initial_radius_large_sphere():
    r = initial_radius(1.0, 0.01)
    assert abs(r - (2 / 0.01 - 2)) < 0.1
    assert _h(1.0, r) == pytest.approx(0.01, rel=1e-13)


def test_initial_radius_errors():
    with pytest.raises(ValueError):
        initial_radius(1.0, 0.5)
    with pytest.raises(ValueError):
        initial_radius(1.0, 0.0)


def test_newton_settings_validation():
    with pytest.raises(ValueError):
        NewtonSettings(tol=1e-14)
    with pytest.raises(ValueError):
        NewtonSettings(max_iter=0)
    with pytest.raises(ValueError):
        NewtonSettings(h_ratio=1.5)


# linearization ------------------------------------------------------------


def test_linearization_on_unit_sphere(grid31, flat):
    op = assemble_linearization(compute_geometry(GraphSurface.sphere(grid31, 1.0), flat))
    assert np.max(np.abs(op.apply(np.ones(grid31.size)) + 2)) <= 1e-12
    for m in (-1, 0, 1):
        assert np.max(np.abs(op.apply(grid31.Y[:, coeff_index(1, m)]))) <= 1e-9


def test_flat_operator_has_three_dimensional_kernel(grid15, flat):
    op = assemble_linearization(compute_geometry(GraphSurface.sphere(grid15, 1.0), flat))
    lam = np.sort(np.abs(np.linalg.eigvals(op.galerkin)))
    assert np.all(lam[:3] <= 1e-8)
    assert lam[3] > 1.0


def test_linearization_constant_on_schwarzschild_sphere(grid31):
    fam = DataFamily(mass=2.0)
    geom = compute_geometry(GraphSurface.sphere(grid31, 10.0), fam)
    L1 = assemble_linearization(geom).apply(np.ones(grid31.size))
    phi = 1.1
    H = _h(2.0, 10.0)
    ric_nn = -2 * 2.0 / (1000 * phi**6)
    assert np.max(np.abs(L1 + (H * H / 2 + ric_nn))) <= 1e-12
    # closed form: 0.0091444777 - 0.0022578957 = 0.0068865819
    assert np.max(np.abs(L1 + 0.0068865819)) <= 1e-9


def test_linearization_constant_equals_potential(grid15, york, perturbed):
    fam = perturbed.replace(k_kind="york", momentum=(0.0, 0.05, 0.1), sign_branch="minus")
    geom = compute_geometry(_bumped_sphere(grid15, 20.0, 0.03, (3, 1)), fam)
    op = assemble_linearization(geom)
    s = -1
    expected = -(geom.A_norm2 + geom.ric_nn + s * geom.grad_nu_K_nn - s * geom.grad_nu_trK)
    assert np.max(np.abs(op.apply(np.ones(grid15.size)) - expected)) <= 1e-9 * np.max(np.abs(expected))


@pytest.mark.parametrize("branch", ["plus", "minus"])
def test_linearization_matches_finite_differences(grid15, branch, rng):
    fam = DataFamily(
        mass=1.0,
        metric_kind="schwarzschild_plus_perturbation",
        perturbation=default_perturbation(1e-3),
        k_kind="york",
        momentum=(0.02, 0.0, 0.1),
        sign_branch=branch,
    )
    # on a solution H +- P is constant, so the tangential part of a radial
    # variation does not contribute
    h = _h(1.0, 20.0)
    surf = continuation(fam, [(h, 0.0), (h, 1.0)], grid=grid15)[-1].surface
    geom = compute_geometry(surf, fam)
    op = assemble_linearization(geom)
    for _ in range(3):
        c = np.zeros(grid15.ncoeffs)
        c[:81] = rng.standard_normal(81) / (1 + np.arange(81)) ** 0.5
        w = grid15.Y @ c
        Lf = op.apply(geom.q * w)

        def remainder(eps):
            hp = compute_geometry(surf.with_coeffs(surf.coeffs + eps * c), fam).hp
            return np.max(np.abs(hp - geom.hp - eps * Lf))

        eps = 1e-5
        hp_p = compute_geometry(surf.with_coeffs(surf.coeffs + eps * c), fam).hp
        hp_m = compute_geometry(surf.with_coeffs(surf.coeffs - eps * c), fam).hp
        fd = (hp_p - hp_m) / (2 * eps)
        assert np.max(np.abs(fd - Lf)) <= 1e-6 * np.max(np.abs(Lf))
        # the Taylor remainder is quadratic in eps
        slope = np.log2(remainder(2e-3) / remainder(1e-3))
        assert slope == pytest.approx(2.0, abs=0.1)


def test_singular_operator_reports_smallest_singular_value(grid15, flat):
    op = assemble_linearization(compute_geometry(GraphSurface.sphere(grid15, 1.0), flat))
    # constants lie in the range; the translation modes do not
    f = op.solve(np.ones(grid15.size))
    assert np.max(np.abs(op.apply(f) - 1)) <= 1e-10
    with pytest.raises(LinearSolveError) as info:
        op.solve(grid15.Y[:, coeff_index(1, 0)])
    assert info.value.smallest_singular_value <= 1e-8


# Newton ---------------------------------------------------------------------


def test_newton_recovers_centered_schwarzschild_sphere(grid31, schwarzschild):
    h = _h(1.0, 20.0)
    r = initial_radius(1.0, h)
    res = newton_solve(_bumped_sphere(grid31, r), schwarzschild, h)
    assert res.converged and res.iterations <= 6
    assert np.max(np.abs(res.surface.values - r)) <= 1e-8 * r
    assert res.residual <= 1e-10
    assert res.summary.hawking_mass == pytest.approx(1.0, abs=1e-8)


def test_newton_flat_inversion(grid31, flat):
    res = newton_solve(GraphSurface.sphere(grid31, 9.0), flat, 0.2)
    assert np.max(np.abs(res.surface.values - 10.0)) <= 1e-10


def test_newton_converges_quadratically(grid31, schwarzschild):
    h = _h(1.0, 30.0)
    res = newton_solve(_bumped_sphere(grid31, initial_radius(1.0, h), 0.1, (3, 2)), schwarzschild, h)
    r = res.residuals
    ratios = [r[k + 1] / r[k] ** 2 for k in range(len(r) - 1) if r[k] < 1e-3 and r[k + 1] > 1e-14]
    assert ratios and max(ratios) < 1e3


def test_newton_on_perturbed_data_satisfies_flags(grid31, perturbed):
    h = _h(1.0, 50.0)
    res = continuation(perturbed, [(h, 0.0), (h, 1.0)], grid=grid31)[-1]
    assert res.converged and res.residual <= 1e-10
    assert res.summary.flags_ok()
    assert res.summary.convexity_margin > 0


def test_newton_failures(grid15, schwarzschild):
    h = _h(1.0, 20.0)
    with pytest.raises(ValueError):
        newton_solve(GraphSurface.sphere(grid15, 20.0), schwarzschild, 0.0)
    with pytest.raises(ConvergenceError) as info:
        newton_solve(_bumped_sphere(grid15, 20.0, 0.1), schwarzschild, h, NewtonSettings(max_iter=1))
    assert info.value.result is not None and not info.value.result.converged


# continuation and foliation -----------------------------------------------------


def test_tau_sweep_of_unchanged_data_stays_on_sphere(grid15, schwarzschild):
    h = _h(1.0, 25.0)
    results = continuation(schwarzschild, [(h, 0.0), (h, 1.0)], grid=grid15)
    r = initial_radius(1.0, h)
    assert [res.tau for res in results] == [0.0, 1.0]
    for res in results:
        assert np.max(np.abs(res.surface.values - r)) <= 1e-9 * r


def test_york_tau_sweep_drifts_monotonically(grid15, york):
    h = _h(1.0, 30.0)
    curve = [(h, 0.0)] + [(h, t) for t in (0.25, 0.5, 0.75, 1.0)]
    z = [res.summary.a_e[2] for res in continuation(york, curve, grid=grid15)]
    assert z[0] == pytest.approx(0.0, abs=1e-10)
    assert np.all(np.diff(z) > 0)
    others = [np.hypot(*res.summary.a_e[:2]) for res in continuation(york, curve[:2], grid=grid15)]
    assert max(others) <= 1e-8


def test_continuation_endpoint_independence_small_grid(grid15, perturbed):
    h, h2 = _h(1.0, 20.0), _h(1.0, 30.0)
    a = continuation(perturbed, [(h, 0.0), (h, 1.0), (h2, 1.0)], grid=grid15)[-1]
    b = continuation(perturbed, [(h, 0.0), (h2, 0.0), (h2, 1.0)], grid=grid15)[-1]
    assert np.max(np.abs(a.surface.values - b.surface.values)) <= 1e-7


def test_continuation_failure_reports_last_good(grid15, york):
    h = _h(1.0, 20.0)
    settings = NewtonSettings(max_iter=1, max_halvings=1, dtau=0.5)
    with pytest.raises(ContinuationError) as info:
        continuation(york, [(h, 0.0), (h, 1.0)], settings, grid=grid15)
    assert info.value.last_good == (pytest.approx(h), 0.0)


def test_continuation_requires_tau_zero_start(grid15, york):
    with pytest.raises(ValueError):
        continuation(york, [(0.1, 0.5)], grid=grid15)


def test_schwarzschild_foliation_radii(grid15, schwarzschild):
    radii = [20.0, 40.0, 80.0]
    fol = foliate(schwarzschild, [_h(1.0, r) for r in radii], grid=grid15)
    for r, res in zip(radii, fol.results):
        assert np.max(np.abs(res.surface.values - r)) <= 1e-8 * r
    assert fol.nested and fol.lapse_sign_definite
    assert all(rec["lapse_max"] < 0 for rec in fol.lapse)


def test_euclidean_foliation_is_concentric(grid15, flat):
    hs = [0.2, 0.1, 0.05]
    fol = foliate(flat, hs, grid=grid15)
    for h, res in fol.members:
        assert np.max(np.abs(res.surface.values - 2 / h)) <= 1e-10
    assert fol.nested


def test_increasing_h_list_is_nested(grid15, schwarzschild):
    fol = foliate(schwarzschild, [_h(1.0, r) for r in (60.0, 30.0)], grid=grid15)
    assert fol.nested and fol.lapse_sign_definite


def test_foliate_rejects_non_monotone(schwarzschild):
    with pytest.raises(ValueError):
        foliate(schwarzschild, [0.1, 0.05, 0.07])
    with pytest.raises(ValueError):
        foliate(schwarzschild, [0.1, -0.05])


# spectral gap and quadratic form ---------------------------------------------------


def test_gap_vanishes_on_flat_sphere(grid15, flat):
    op = assemble_linearization(compute_geometry(GraphSurface.sphere(grid15, 1.0), flat))
    assert abs(spectral_gap(op)) <= 1e-8


def test_quadratic_form_on_unit_sphere(grid31, flat):
    geom = compute_geometry(GraphSurface.sphere(grid31, 1.0), flat)
    direct, decomposed = quadratic_form(geom, flat, np.ones(grid31.size))
    assert direct == pytest.approx(-8 * np.pi, rel=1e-12)
    assert decomposed == pytest.approx(-8 * np.pi, rel=1e-12)
    for m in (-1, 0, 1):
        d, q = quadratic_form(geom, flat, grid31.Y[:, coeff_index(1, m)])
        assert abs(d) <= 1e-8 and abs(q) <= 1e-8


@pytest.mark.parametrize("branch", ["plus", "minus"])
def test_quadratic_form_identity_on_york_sphere(grid15, york, rng, branch):
    fam = york.replace(sign_branch=branch)
    geom = compute_geometry(_bumped_sphere(grid15, 30.0, 0.02, (2, -1)), fam)
    for _ in range(3):
        # degree L/3 keeps every integrand within the quadrature's exactness
        f = grid15.random_field(rng, lmax=5, decay=1.0)
        direct, decomposed = quadratic_form(geom, fam, f)
        assert abs(direct - decomposed) <= 1e-6 * abs(direct)
