"""Invariant suite run by ``pmcfol verify``.

Each check evaluates one property of the numerics on the configured data
family and reports the measured error next to its tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .ambient import DataFamily, eval_metric, schwarzschild_ricci
from .geometry import (
    GraphSurface,
    compute_geometry,
    hawking_mass,
    off_center_sphere_integral,
    schwarzschild_sphere_curvature,
)
from .solver import NewtonSettings, assemble_linearization, continuation, quadratic_form
from .spectral import SphericalGrid, sh_analysis, sh_synthesis

__all__ = ["Check", "run_invariants"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28s} error={self.value:.3e}  tol={self.tolerance:.1e}"


def _probe_radius(family: DataFamily) -> float:
    return max(20.0, 8.0 * family.sigma, 20.0 * family.m)


def run_invariants(
    family: DataFamily,
    degree: int = 31,
    seed: int = 0,
    settings: NewtonSettings = NewtonSettings(),
) -> list[Check]:
    rng = np.random.default_rng(seed)
    grid = SphericalGrid(degree)
    checks = []

    checks.append(Check("quadrature weights", abs(grid.weights.sum() - 4 * np.pi), 1e-12))
    c = rng.standard_normal(grid.ncoeffs)
    checks.append(Check("transform round trip", float(np.max(np.abs(sh_analysis(grid, sh_synthesis(grid, c)) - c))), 1e-12))

    r0 = _probe_radius(family)
    dirs = rng.standard_normal((50, 3))
    x = dirs / np.linalg.norm(dirs, axis=1, keepdims=True) * rng.uniform(r0 / 2, 4 * r0, (50, 1))
    me = eval_metric(family, x)
    checks.append(Check("metric inverse", float(np.max(np.abs(me.g @ me.g_inv - np.eye(3)))), 1e-12))
    if family.m > 0 and not family.has_perturbation:
        err = float(np.max(np.abs(me.ricci - schwarzschild_ricci(family.m, x))))
        checks.append(Check("schwarzschild ricci", max(err, float(np.max(np.abs(me.scal)))), 1e-10))

    geom = compute_geometry(GraphSurface.sphere(grid, r0), family)
    nu_norm = np.abs(np.einsum("ni,nij,nj->n", geom.nu, geom.g, geom.nu) - 1).max()
    nu_tan = np.abs(np.einsum("ni,nij,naj->na", geom.nu, geom.g, geom.E)).max() / r0
    tr_ao = np.abs(np.einsum("nab,nab->n", geom.gamma_inv, geom.A_trless)).max()
    checks.append(Check("unit normal", float(max(nu_norm, nu_tan)), 1e-10))
    checks.append(Check("traceless part", float(tr_ao) * r0, 1e-10))
    checks.append(Check("gauss equation", float(np.abs(geom.G - geom.G_extrinsic).max()) * r0**2, 1e-8))
    if not family.has_perturbation:
        h_err = np.abs(geom.H - schwarzschild_sphere_curvature(family.m, r0)).max() * r0
        checks.append(Check("sphere mean curvature", float(h_err), 1e-10))
        checks.append(Check("hawking mass", abs(hawking_mass(geom) - family.m), 1e-8))

    h = float(schwarzschild_sphere_curvature(family.m, r0))
    sol = continuation(family, [(h, 0.0), (h, family.tau)], settings, grid)[-1]
    g = sol.geometry
    op = assemble_linearization(g, family)
    worst = 0.0
    for _ in range(3):
        f = grid.random_field(rng, degree // 3, 1.0)
        du = sh_analysis(grid, f / g.q)
        eps = 1e-5
        plus = compute_geometry(sol.surface.with_coeffs(sol.surface.coeffs + eps * du), family).hp
        minus = compute_geometry(sol.surface.with_coeffs(sol.surface.coeffs - eps * du), family).hp
        Lf = op.apply(f)
        worst = max(worst, float(np.abs((plus - minus) / (2 * eps) - Lf).max() / np.abs(Lf).max()))
    checks.append(Check("linearization vs FD", worst, 1e-6))

    f = grid.random_field(rng, degree // 3, 1.0)
    direct, decomposed = quadratic_form(g, family, f)
    checks.append(Check("quadratic form identity", abs(direct - decomposed) / abs(direct), 1e-6))

    R, a = 2.0, 1.0
    fine = SphericalGrid(max(degree, 31))
    N = fine.unit_normal
    rr = np.linalg.norm(np.array([0.0, 0.0, a]) + R * N, axis=1)
    err = max(
        abs(np.dot(fine.weights, R**2 * rr**-k * N[:, 2] ** l) - off_center_sphere_integral(k, l, R, a))
        for k, l in ((3, 0), (3, 1), (3, 2))
    )
    checks.append(Check("off-center integrals", float(err), 1e-10))
    return checks
