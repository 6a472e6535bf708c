"""Surfaces of prescribed ``H +- P`` in asymptotically flat initial data.

The package solves ``H + P = h`` or ``H - P = h`` for closed radial graphs
by Newton iteration with continuation from centered Schwarzschild spheres,
sweeps ``h`` to build a foliation, and reads off the Hawking mass and the
linear momentum from the leaves.
"""

from .ambient import DataFamily, PerturbationSpec, PerturbationTerm, default_perturbation, eval_extrinsic, eval_metric, interpolate_data
from .geometry import GraphSurface, compute_geometry, hawking_mass, laplace_beltrami, summarize
from .momentum import center_drift_series, recover_momentum, tau_of_v
from .solver import (
    NewtonSettings,
    assemble_linearization,
    continuation,
    foliate,
    initial_radius,
    newton_solve,
    quadratic_form,
    spectral_gap,
)
from .spectral import SphericalGrid

__version__ = "0.1.0"

__all__ = [
    "DataFamily",
    "GraphSurface",
    "NewtonSettings",
    "PerturbationSpec",
    "PerturbationTerm",
    "SphericalGrid",
    "assemble_linearization",
    "center_drift_series",
    "compute_geometry",
    "continuation",
    "default_perturbation",
    "eval_extrinsic",
    "eval_metric",
    "foliate",
    "hawking_mass",
    "initial_radius",
    "interpolate_data",
    "laplace_beltrami",
    "newton_solve",
    "quadratic_form",
    "recover_momentum",
    "spectral_gap",
    "summarize",
    "tau_of_v",
]
