"""The linearized operator: finite-difference check, kernel and spectral gap.

Run with ``python demos/02_linearization.py``.
"""

# %%
import numpy as np

from pmcfol.ambient import DataFamily
from pmcfol.geometry import GraphSurface, compute_geometry
from pmcfol.solver import assemble_linearization, spectral_gap
from pmcfol.spectral import SphericalGrid

grid = SphericalGrid(15)
rng = np.random.default_rng(0)

# %% On the flat unit sphere the operator is Delta + 2: translations span a 3-dimensional kernel.
flat = DataFamily(metric_kind="euclidean", sigma=0.1)
op = assemble_linearization(compute_geometry(GraphSurface.sphere(grid, 1.0), flat))
lam = np.sort(np.abs(np.linalg.eigvals(op.galerkin)))
print("smallest |eigenvalues| on the flat unit sphere:", np.round(lam[:5], 10))

# %% In Schwarzschild data the kernel lifts to about 6 m / R^3.
family = DataFamily(mass=1.0)
for R in (25.0, 50.0, 100.0):
    geom = compute_geometry(GraphSurface.sphere(grid, R), family)
    mu1 = spectral_gap(assemble_linearization(geom))
    print(f"R = {R:5.0f}: mu1 = {mu1:.3e}, mu1 R^3 / 6m = {mu1 * R**3 / 6:.4f}")

# %% Directional derivative of H + P against a central difference along a radial variation.
geom = compute_geometry(GraphSurface.sphere(grid, 20.0), family)
op = assemble_linearization(geom)
c = np.zeros(grid.ncoeffs)
c[:36] = rng.standard_normal(36)
eps = 1e-5
surf = geom.surface
fd = (
    compute_geometry(surf.with_coeffs(surf.coeffs + eps * c), family).hp
    - compute_geometry(surf.with_coeffs(surf.coeffs - eps * c), family).hp
) / (2 * eps)
exact = op.apply(geom.q * (grid.Y @ c))
print(f"relative FD error {np.abs(fd - exact).max() / np.abs(exact).max():.1e}")
