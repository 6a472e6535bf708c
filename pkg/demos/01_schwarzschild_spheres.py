"""Round spheres in Schwarzschild data: Newton recovers them from a bumped start.

Run with ``python demos/01_schwarzschild_spheres.py``.
"""

# %%
import numpy as np

from pmcfol.ambient import DataFamily
from pmcfol.geometry import GraphSurface, schwarzschild_sphere_curvature
from pmcfol.solver import initial_radius, newton_solve
from pmcfol.spectral import SphericalGrid, coeff_index

grid = SphericalGrid(31)
family = DataFamily(mass=1.0)

# %% Prescribe the mean curvature of the coordinate sphere r = 40 and start 5% off.
h = float(schwarzschild_sphere_curvature(1.0, 40.0))
r = initial_radius(1.0, h)
bump = grid.Y[:, coeff_index(2, 0)] + grid.Y[:, coeff_index(3, 1)]
start = GraphSurface.from_values(grid, r * (1 + 0.05 * bump / np.abs(bump).max()))

result = newton_solve(start, family, h)
print(f"h = {h:.6f}, sphere radius {r:.6f}")
print("residual history:", " ".join(f"{x:.1e}" for x in result.residuals))
print(f"max |u - r| / r = {np.abs(result.surface.values - r).max() / r:.2e}")

# %% The Hawking mass of every coordinate sphere is exactly the mass parameter.
s = result.summary
print(f"Hawking mass {s.hawking_mass:.12f}, area radius {s.R_e:.6f}, trace-free L2 {s.trless_L2:.1e}")
