"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are printed in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from conftest import ACCEPTANCE_LINES
from pmcfol.ambient import DataFamily, default_perturbation
from pmcfol.geometry import (
    GraphSurface,
    compute_geometry,
    off_center_sphere_integral,
    schwarzschild_sphere_curvature,
)
from pmcfol.momentum import (
    BRANCH_DRIFT_SIGN,
    center_difference_limit,
    center_drift_series,
    recover_momentum,
    tau_of_v,
)
from pmcfol.solver import (
    assemble_linearization,
    continuation,
    foliate,
    initial_radius,
    newton_solve,
    quadratic_form,
    spectral_gap,
)
from pmcfol.spectral import SphericalGrid, coeff_index

pytestmark = pytest.mark.acceptance


def _record(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {number:2d}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def _h(m, r):
    return float(schwarzschild_sphere_curvature(m, r))


def _perturbed(eta=1e-3):
    return DataFamily(
        mass=1.0,
        metric_kind="schwarzschild_plus_perturbation",
        perturbation=default_perturbation(eta),
    )


def _five_percent_bump(grid, r):
    """Sphere of radius r with a non-symmetric bump of sup-size 5% of r."""
    w = grid.Y[:, coeff_index(2, 0)] + grid.Y[:, coeff_index(3, 1)] - grid.Y[:, coeff_index(1, -1)]
    w /= np.max(np.abs(w))
    return GraphSurface.from_values(grid, r * (1 + 0.05 * w))


def test_01_schwarzschild_exactness(grid31):
    fam = DataFamily(mass=1.0)
    worst_err, worst_it, worst_t = 0.0, 0, 0.0
    for r in (20.0, 50.0, 100.0):
        h = _h(1.0, r)
        rh = initial_radius(1.0, h)
        t0 = time.perf_counter()
        res = newton_solve(_five_percent_bump(grid31, rh), fam, h)
        dt = time.perf_counter() - t0
        err = float(np.max(np.abs(res.surface.values - rh)) / rh)
        worst_err, worst_it, worst_t = max(worst_err, err), max(worst_it, res.iterations), max(worst_t, dt)
    ok = worst_err <= 1e-8 and worst_it <= 8 and worst_t < 5.0
    _record(1, "Schwarzschild exactness", ok,
            f"max rel dev {worst_err:.2e} (<=1e-8), max iterations {worst_it} (<=8), max time {worst_t:.2f}s (<5s)")


def test_02_hawking_mass_oracle(grid31):
    fam = DataFamily(mass=1.0)
    fol = foliate(fam, [_h(1.0, r) for r in (20.0, 40.0, 80.0, 160.0)], grid=grid31)
    dev_s = max(abs(r.summary.hawking_mass - 1.0) for r in fol.results)
    flat = DataFamily(metric_kind="euclidean", sigma=0.1)
    fol_e = foliate(flat, [0.5, 0.1, 0.02], grid=grid31)
    dev_e = max(abs(r.summary.hawking_mass) for r in fol_e.results)
    _record(2, "Hawking mass oracle", dev_s <= 1e-8 and dev_e <= 1e-10,
            f"Schwarzschild max |m_H - m| {dev_s:.2e} (<=1e-8), Euclidean max |m_H| {dev_e:.2e} (<=1e-10)")


def test_03_linearization_fidelity(grid31):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for branch in ("plus", "minus"):
        fam = _perturbed().replace(k_kind="york", momentum=(0.03, -0.02, 0.1), sign_branch=branch)
        h = _h(1.0, 25.0)
        surf = continuation(fam, [(h, 0.0), (h, 1.0)], grid=grid31)[-1].surface
        geom = compute_geometry(surf, fam)
        op = assemble_linearization(geom)
        eps = 1e-5
        for _ in range(10):
            c = np.zeros(grid31.ncoeffs)
            c[:144] = rng.standard_normal(144) / (1.0 + np.arange(144)) ** 0.5
            Lf = op.apply(geom.q * (grid31.Y @ c))
            hp_p = compute_geometry(surf.with_coeffs(surf.coeffs + eps * c), fam).hp
            hp_m = compute_geometry(surf.with_coeffs(surf.coeffs - eps * c), fam).hp
            fd = (hp_p - hp_m) / (2 * eps)
            worst = max(worst, float(np.max(np.abs(fd - Lf)) / np.max(np.abs(Lf))))
    flat = DataFamily(metric_kind="euclidean", sigma=0.1)
    op = assemble_linearization(compute_geometry(GraphSurface.sphere(grid31, 1.0), flat))
    lam = np.sort(np.abs(np.linalg.eigvals(op.galerkin)))
    kernel_ok = bool(np.all(lam[:3] <= 1e-8) and lam[3] > 1e-2)
    _record(3, "Linearization fidelity", worst <= 1e-6 and kernel_ok,
            f"20 directions max rel err {worst:.2e} (<=1e-6); flat kernel |lambda_1..3| <= {lam[2]:.1e}, "
            f"|lambda_4| = {lam[3]:.2f}")


def test_04_quadratic_form_identity(grid31):
    rng = np.random.default_rng(7)
    worst = 0.0
    for branch in ("plus", "minus"):
        fam = DataFamily(mass=1.0, k_kind="york", momentum=(0.0, 0.0, 0.1), sign_branch=branch)
        h = _h(1.0, 30.0)
        geom = continuation(fam, [(h, 0.0), (h, 1.0)], grid=grid31)[-1].geometry
        for _ in range(5):
            f = grid31.random_field(rng, grid31.degree // 3, 1.0)
            direct, decomposed = quadratic_form(geom, fam, f)
            worst = max(worst, abs(direct - decomposed) / abs(direct))
    flat = DataFamily(metric_kind="euclidean", sigma=0.1)
    d, q = quadratic_form(compute_geometry(GraphSurface.sphere(grid31, 1.0), flat), flat, np.ones(grid31.size))
    dev = max(abs(d + 8 * math.pi), abs(q + 8 * math.pi))
    _record(4, "Quadratic-form identity", worst <= 1e-6 and dev <= 1e-10,
            f"max rel |direct - decomposed| {worst:.2e} (<=1e-6); flat unit sphere f=1 off -8pi by {dev:.1e}")


def test_05_spectral_gap(grid31):
    fam = DataFamily(mass=1.0)
    ratios, times = [], []
    for R in (25.0, 50.0, 100.0):
        geom = compute_geometry(GraphSurface.sphere(grid31, R), fam)
        t0 = time.perf_counter()
        mu1 = spectral_gap(assemble_linearization(geom))
        times.append(time.perf_counter() - t0)
        ratios.append(mu1 * R**3 / 6.0)
    dev = [abs(r - 1) for r in ratios]
    ok = 0.9 <= ratios[1] <= 1.1 and dev[0] > dev[1] > dev[2] and max(times) < 30
    _record(5, "Spectral gap", ok,
            "mu1 R^3/6m = " + ", ".join(f"{r:.4f}" for r in ratios)
            + f" at R_e = 25, 50, 100 (50 in [0.9, 1.1], trending to 1); max eigen-solve {max(times):.2f}s (<30s)")


def test_06_foliation_property(grid31):
    radii = [20.0, 25.3, 31.9, 40.3, 50.9, 64.3, 81.2, 100.0]
    fol = foliate(_perturbed(1e-3), [_h(1.0, r) for r in radii], grid=grid31)
    convex = min(r.summary.convexity_margin for r in fol.results)
    nest = min(rec["nesting_margin"] for rec in fol.lapse)
    ok = len(fol.results) == 8 and fol.nested and fol.lapse_sign_definite and convex > 0
    _record(6, "Foliation property", ok,
            f"8 leaves, min nesting margin {nest:.3f} (>0), lapse sign-definite on all 7 pairs: "
            f"{fol.lapse_sign_definite}, min convexity margin {convex:.2e} (>0)")


def test_07_momentum_recovery(grid31):
    t0 = time.perf_counter()
    fam = DataFamily(mass=1.0, k_kind="york", momentum=(0.0, 0.0, 0.1), sign_branch="plus")
    radii = np.geomspace(30.0, 300.0, 12)
    fol = foliate(fam, [_h(1.0, r) for r in radii], grid=grid31)
    series = center_drift_series(fol)
    est = recover_momentum(series, 1.0, "york", 0.0, "plus")
    elapsed = time.perf_counter() - t0
    p = np.asarray(est.momentum)
    angle = math.degrees(math.acos(min(1.0, abs(p[2]) / np.linalg.norm(p))))
    diff = float(np.linalg.norm(series.center_difference[-1]))
    target = center_difference_limit(1.0, tau_of_v(0.1))
    drift_sign = int(np.sign(series.drift[-1, 2]))
    ok = (
        abs(np.linalg.norm(p) - 0.1) <= 0.01
        and angle <= 2.0
        and abs(diff - target) <= 0.1 * target
        and elapsed < 120
    )
    _record(7, "Momentum recovery", ok,
            f"|p_hat| = {np.linalg.norm(p):.7f}, angle to e3 {angle:.2e} deg, |a_e - a_g| at R_e={series.R_e[-1]:.0f} "
            f"= {diff:.6f} vs {target:.7f} ({abs(diff - target) / target:.1%}), {elapsed:.1f}s; "
            f"observed H+P drift sign {drift_sign:+d} (library convention {BRANCH_DRIFT_SIGN['plus']:+d})")
    assert drift_sign == BRANCH_DRIFT_SIGN["plus"]


def test_08_off_center_integration():
    R, a = 2.0, 1.0
    grid = SphericalGrid(63)
    N = grid.unit_normal
    r = np.linalg.norm(np.array([0.0, 0.0, a]) + R * N, axis=1)
    worst = 0.0
    values = []
    for k, l in ((3, 0), (3, 1), (3, 2)):
        closed = off_center_sphere_integral(k, l, R, a)
        quad = float(np.dot(grid.weights, R * R * r**-k * N[:, 2] ** l))

        def integrand(phi, th):
            x = np.array([R * math.sin(th) * math.cos(phi), R * math.sin(th) * math.sin(phi), a + R * math.cos(th)])
            return np.linalg.norm(x) ** -k * math.cos(th) ** l * R * R * math.sin(th)

        dbl = integrate.dblquad(integrand, 0, math.pi, 0, 2 * math.pi, epsabs=1e-13, epsrel=1e-13)[0]
        worst = max(worst, abs(quad - closed) / abs(closed), abs(dbl - closed) / abs(closed))
        values.append(closed)
    literal = 4 * math.pi / 3
    _record(8, "Off-center integration formula", worst <= 1e-10,
            f"quadrature and dblquad match the closed form to {worst:.1e} (<=1e-10); "
            f"(3,0),(3,1),(3,2) = {values[0]:.6f}, {values[1]:.6f}, {values[2]:.6f}. "
            f"The prefactor is 2 pi R/|a|: (3,0) equals 8 pi/3, so the quoted 4 pi/3 "
            f"(prefactor pi R/|a|) is off by {values[0] - literal:.6f} and is not reproduced")


def test_09_endpoint_independence(grid31):
    fam = _perturbed(1e-3)
    h, h2 = _h(1.0, 20.0), _h(1.0, 40.0)
    a = continuation(fam, [(h, 0.0), (h, 1.0), (h2, 1.0)], grid=grid31)[-1]
    b = continuation(fam, [(h, 0.0), (h2, 0.0), (h2, 1.0)], grid=grid31)[-1]
    dev = float(np.max(np.abs(a.surface.values - b.surface.values)))
    _record(9, "Endpoint independence", dev <= 1e-7, f"sup |u_a - u_b| = {dev:.2e} (<=1e-7)")


def test_10_traceless_scaling(grid31):
    etas = np.array([1e-4, 3e-4, 1e-3])
    h = _h(1.0, 30.0)
    vals = []
    for eta in etas:
        res = continuation(_perturbed(eta), [(h, 0.0), (h, 1.0)], grid=grid31)[-1]
        vals.append(res.summary.area * res.summary.trless_L2**2)
    slope = float(np.polyfit(np.log(etas), np.log(vals), 1)[0])
    _record(10, "Traceless scaling", abs(slope - 2.0) <= 0.2,
            f"fitted exponent {slope:.3f} (2.0 +- 0.2) from |Sigma| ||A°||^2 = "
            + ", ".join(f"{v:.3e}" for v in vals))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
