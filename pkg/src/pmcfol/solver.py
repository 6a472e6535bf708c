"""Newton iteration and continuation for ``H +- P = h`` on radial graphs.

The linearization of ``H +- P`` under a normal variation ``f nu`` is::

    L f = -Delta f - f (|A|^2 + Ric(nu,nu) +- nabla_nu K(nu,nu) -+ nabla_nu tr K)
          +- 2 K(grad f, nu)

A radial increment ``du`` moves the surface with normal speed ``q du``
where ``q = g(rho, nu)``, so a Newton step solves ``L f = h - (H +- P)`` and
sets ``du = f / q``.  The solve is a Galerkin projection onto the harmonic
coefficients of degree ``<= L``: the nodal operator acts on synthesized
fields and the result is projected back by quadrature.  On band-limited
fields this coincides with the dense nodal collocation matrix, which is
available through :attr:`LinearizedOperator.matrix`.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .ambient import DataFamily, interpolate_data
from .geometry import (
    GeometryError,
    GraphSurface,
    SurfaceGeometry,
    SurfaceSummary,
    compute_geometry,
    schwarzschild_sphere_curvature,
    summarize,
)
from .spectral import SphericalGrid, sh_analysis

__all__ = [
    "ContinuationError",
    "ConvergenceError",
    "FoliationResult",
    "LinearSolveError",
    "LinearizedOperator",
    "NewtonSettings",
    "SolveResult",
    "assemble_linearization",
    "continuation",
    "foliate",
    "initial_radius",
    "newton_solve",
    "quadratic_form",
    "spectral_gap",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class LinearSolveError(SolverError):
    """The linearized operator is numerically singular."""

    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(f"{message} (smallest singular value {smallest_singular_value:.3e})")
        self.smallest_singular_value = smallest_singular_value


class ConvergenceError(SolverError):
    """Newton did not reach the tolerance; ``result`` holds the last iterate."""

    def __init__(self, message: str, result: "SolveResult | None" = None):
        super().__init__(message)
        self.result = result


class ContinuationError(SolverError):
    """Segment bisection exhausted; ``last_good`` is the last solved ``(h, tau)``."""

    def __init__(self, message: str, last_good, result: "SolveResult | None" = None):
        super().__init__(f"{message}; last good (h, tau) = {last_good}")
        self.last_good = last_good
        self.result = result


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 8
    dtau: float = 0.1
    h_ratio: float = 0.8

    def __post_init__(self):
        if not self.tol >= 1e-13:
            raise ValueError("tol must be at least 1e-13")
        if self.max_iter < 1 or self.max_halvings < 0:
            raise ValueError("max_iter must be positive and max_halvings nonnegative")
        if not 0 < self.dtau <= 1:
            raise ValueError("dtau must lie in (0, 1]")
        if not 0 < self.h_ratio < 1:
            raise ValueError("h_ratio must lie in (0, 1)")


def initial_radius(m: float, h: float) -> float:
    """Radius of the centered Schwarzschild sphere with mean curvature ``h``.

    Only the outer branch ``r > m (2 + sqrt 3) / 2``, on which the sphere
    curvature decreases monotonically, is searched.
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if m == 0:
        return 2.0 / h
    r1 = 0.5 * m * (2.0 + math.sqrt(3.0))
    hmax = float(schwarzschild_sphere_curvature(m, r1))
    if h >= hmax:
        raise ValueError(f"h = {h} exceeds the maximal sphere curvature {hmax:.6g} for m = {m}")
    f = lambda r: float(schwarzschild_sphere_curvature(m, r)) - h
    return brentq(f, r1, 2.0 / h, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """``L`` at a surface, held through its nodal coefficient fields.

    ``potential`` is the zeroth-order coefficient (``L 1 = -potential``) and
    ``drift`` the frame components of the first-order term.
    """

    geom: SurfaceGeometry
    potential: np.ndarray
    drift: np.ndarray  # (N, 2)
    sign: int

    @property
    def grid(self) -> SphericalGrid:
        return self.geom.grid

    @cached_property
    def synthesized(self) -> np.ndarray:
        """``L`` applied to every harmonic, shape ``(nodes, ncoeffs)``."""
        grid = self.grid
        w11, w21, w22, w1, w2 = self.geom.laplacian_coefficients
        return -(
            w11[:, None] * grid.basis("d11")
            + w21[:, None] * grid.basis("d12")
            + w22[:, None] * grid.basis("d22")
            + (w1 - self.drift[:, 0])[:, None] * grid.basis("d1")
            + (w2 - self.drift[:, 1])[:, None] * grid.basis("d2")
            + self.potential[:, None] * grid.Y
        )

    @cached_property
    def galerkin(self) -> np.ndarray:
        """Coefficient-space matrix ``analysis @ L @ synthesis``."""
        return self.grid.analysis_matrix @ self.synthesized

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense nodal collocation matrix (nodes x nodes) acting through harmonic projection."""
        return self.synthesized @ self.grid.analysis_matrix

    def apply(self, f) -> np.ndarray:
        f = self.grid.check(f)
        # constants only see the potential; splitting them off avoids roundoff
        # from their spurious high-degree coefficients
        fbar = f.mean(axis=0)
        return self.synthesized @ sh_analysis(self.grid, f - fbar) - self.potential * fbar

    def solve(self, rhs, consistency_tol: float = 1e-9) -> np.ndarray:
        """Band-limited ``f`` with ``analysis(L f) = analysis(rhs)``.

        A singular operator (such as the translation kernel of round spheres in
        flat space) is accepted when ``rhs`` lies in its range: the
        minimum-norm solution is returned if it reproduces ``rhs`` to
        ``consistency_tol`` relative.  Otherwise :class:`LinearSolveError` is
        raised with the smallest singular value.
        """
        b = sh_analysis(self.grid, rhs)
        M = self.galerkin
        try:
            lu = scipy.linalg.lu_factor(M, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise LinearSolveError(str(exc), self.smallest_singular_value()) from exc
        diag = np.abs(np.diag(lu[0]))
        if diag.min() > 1e-10 * diag.max():
            return self.grid.Y @ scipy.linalg.lu_solve(lu, b)
        U, sv, Vt = scipy.linalg.svd(M)
        keep = sv > 1e-10 * sv[0]
        x = Vt[keep].T @ ((U[:, keep].T @ b) / sv[keep])
        if np.linalg.norm(M @ x - b) > consistency_tol * max(np.linalg.norm(b), 1e-300):
            raise LinearSolveError("linearized operator is singular", float(sv[-1]))
        log.debug("singular operator: minimum-norm solve, %d modes dropped", int((~keep).sum()))
        return self.grid.Y @ x

    def smallest_singular_value(self) -> float:
        return float(scipy.linalg.svdvals(self.galerkin).min())


def assemble_linearization(geom: SurfaceGeometry, family: DataFamily | None = None) -> LinearizedOperator:
    family = geom.family if family is None else family
    s = family.sign
    potential = geom.A_norm2 + geom.ric_nn + s * geom.grad_nu_K_nn - s * geom.grad_nu_trK
    drift = 2.0 * s * np.einsum("nab,na->nb", geom.gamma_inv, geom.theta)
    return LinearizedOperator(geom, potential, drift, s)


@dataclass(eq=False)
class SolveResult:
    surface: GraphSurface
    geometry: SurfaceGeometry
    summary: SurfaceSummary
    h: float
    tau: float
    residuals: list
    iterations: int
    converged: bool
    flags: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def residual(self) -> float:
        return self.residuals[-1]


def _residual(geom: SurfaceGeometry, h: float) -> np.ndarray:
    return geom.hp - h


def _finish(surface, geom, h, family, residuals, iters, converged, t0, intrinsic):
    summary = summarize(geom, family, intrinsic=intrinsic)
    return SolveResult(
        surface=surface,
        geometry=geom,
        summary=summary,
        h=float(h),
        tau=float(family.tau),
        residuals=residuals,
        iterations=iters,
        converged=converged,
        flags=dict(summary.flags),
        elapsed=time.perf_counter() - t0,
    )


def newton_solve(
    u0: GraphSurface,
    family: DataFamily,
    h: float,
    settings: NewtonSettings = NewtonSettings(),
    intrinsic_summary: bool = False,
) -> SolveResult:
    """Solve ``H +- P = h`` starting from ``u0``.

    Each step is damped by halving until the sup-norm residual decreases.
    Raises :class:`ConvergenceError` when the tolerance is not met within
    ``settings.max_iter`` iterations or no damped step reduces the residual.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    t0 = time.perf_counter()
    surface = u0
    geom = compute_geometry(surface, family)
    res = _residual(geom, h)
    rnorm = float(np.max(np.abs(res)))
    history = [rnorm]
    it = 0
    while rnorm > settings.tol:
        if it >= settings.max_iter:
            result = _finish(surface, geom, h, family, history, it, False, t0, intrinsic_summary)
            raise ConvergenceError(f"no convergence in {it} iterations (residual {rnorm:.3e})", result)
        op = assemble_linearization(geom, family)
        f = op.solve(-res)
        du = sh_analysis(surface.grid, f / geom.q)
        step = 1.0
        for _ in range(settings.max_halvings + 1):
            trial = surface.with_coeffs(surface.coeffs + step * du)
            try:
                tgeom = compute_geometry(trial, family)
                tres = _residual(tgeom, h)
                tnorm = float(np.max(np.abs(tres)))
            except GeometryError as exc:
                log.debug("step %.3g rejected: %s", step, exc)
                tnorm = np.inf
            if tnorm < rnorm:
                break
            step *= 0.5
        else:
            result = _finish(surface, geom, h, family, history, it, False, t0, intrinsic_summary)
            raise ConvergenceError(f"step halving exhausted at residual {rnorm:.3e}", result)
        surface, geom, res, rnorm = trial, tgeom, tres, tnorm
        it += 1
        history.append(rnorm)
        log.debug("newton it=%d step=%.3g residual=%.3e", it, step, rnorm)
    return _finish(surface, geom, h, family, history, it, True, t0, intrinsic_summary)


def _subdivide(a, b, settings: NewtonSettings) -> int:
    (ha, ta), (hb, tb) = a, b
    n_tau = math.ceil(abs(tb - ta) / settings.dtau - 1e-12)
    ratio = max(ha, hb) / min(ha, hb)
    n_h = math.ceil(math.log(ratio) / -math.log(settings.h_ratio) - 1e-12) if ratio > 1 else 0
    return max(1, n_tau, n_h)


def _interp(a, b, s):
    if s == 1.0:
        return b
    (ha, ta), (hb, tb) = a, b
    return ha * (hb / ha) ** s, ta + (tb - ta) * s


def continuation(
    family: DataFamily,
    curve,
    settings: NewtonSettings = NewtonSettings(),
    grid: SphericalGrid | None = None,
    start: GraphSurface | None = None,
) -> list[SolveResult]:
    """Follow the curve ``[(h_0, tau_0), (h_1, tau_1), ...]`` and return one result per node.

    The walk starts at the centered sphere ``r(h_0)`` which solves the
    equation exactly for ``tau_0 = 0``.  Segments are subdivided so that each
    sub-step changes ``tau`` by at most ``settings.dtau`` and ``h`` by at most
    the factor ``settings.h_ratio``; the previous solution, rescaled by the
    sphere-radius ratio, predicts the next one.  A failed sub-step is
    bisected up to ``settings.max_halvings`` times.
    """
    curve = [(float(h), float(t)) for h, t in curve]
    if not curve:
        raise ValueError("curve must contain at least one node")
    if curve[0][1] != 0.0 and start is None:
        raise ValueError("curve must start at tau = 0")
    grid = grid or SphericalGrid(31)
    m = family.m
    h0, t0 = curve[0]
    surface = start or GraphSurface.sphere(grid, initial_radius(m, h0))
    current = newton_solve(surface, interpolate_data(family, t0), h0, settings)
    results = [current]
    for a, b in zip(curve[:-1], curve[1:]):
        n = _subdivide(a, b, settings)
        s_done = 0.0
        ds = 1.0 / n
        halvings = 0
        while s_done < 1.0 - 1e-14:
            s_next = s_done + ds
            if s_next > 1.0 - 1e-12:
                s_next = 1.0
            h_prev, _ = _interp(a, b, s_done)
            h_next, t_next = _interp(a, b, s_next)
            scale = initial_radius(m, h_next) / initial_radius(m, h_prev)
            pred = current.surface.scaled(scale)
            try:
                current = newton_solve(pred, interpolate_data(family, t_next), h_next, settings)
            except (SolverError, GeometryError) as exc:
                halvings += 1
                if halvings > settings.max_halvings:
                    raise ContinuationError(str(exc), (current.h, current.tau), current) from exc
                ds *= 0.5
                log.info("continuation step failed at (h=%.6g, tau=%.4g); halving", h_next, t_next)
                continue
            s_done = s_next
        results.append(current)
    return results


@dataclass(eq=False)
class FoliationResult:
    members: list  # of (h, SolveResult)
    family: DataFamily
    lapse: list  # one dict per adjacent pair

    @property
    def sign_branch(self) -> str:
        return self.family.sign_branch

    @property
    def results(self) -> list:
        return [r for _, r in self.members]

    @property
    def nested(self) -> bool:
        return all(rec["nesting_margin"] > 0 for rec in self.lapse)

    @property
    def lapse_sign_definite(self) -> bool:
        return all(rec["sign_definite"] for rec in self.lapse)


def lapse_record(inner: SolveResult, outer: SolveResult) -> dict:
    """Lapse proxy ``(u' - u) q / (h' - h)`` and nesting margin between two leaves."""
    du = outer.surface.values - inner.surface.values
    alpha = du * inner.geometry.q / (outer.h - inner.h)
    return {
        "h": inner.h,
        "h_next": outer.h,
        "lapse_min": float(alpha.min()),
        "lapse_max": float(alpha.max()),
        "sign_definite": bool(alpha.min() > 0 or alpha.max() < 0),
        "nesting_margin": float(du.min() if outer.h < inner.h else -du.max()),
    }


def foliate(
    family: DataFamily,
    h_list,
    settings: NewtonSettings = NewtonSettings(),
    grid: SphericalGrid | None = None,
) -> FoliationResult:
    """Sweep ``tau`` to 1 at ``h_list[0]``, then walk ``h`` through ``h_list``."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 1 or any(h <= 0 for h in h_list):
        raise ValueError("h_list must contain positive values")
    diffs = np.diff(h_list)
    if len(h_list) > 1 and not (np.all(diffs < 0) or np.all(diffs > 0)):
        raise ValueError("h_list must be strictly monotone")
    curve = [(h_list[0], 0.0), (h_list[0], family.tau)] + [(h, family.tau) for h in h_list[1:]]
    results = continuation(family, curve, settings, grid)[1:]
    members = list(zip(h_list, results))
    lapse = [lapse_record(a, b) for a, b in zip(results[:-1], results[1:])]
    for rec in lapse:
        if rec["nesting_margin"] <= 0:
            log.warning("leaves at h=%.6g and h=%.6g are not nested", rec["h"], rec["h_next"])
    return FoliationResult(members, family, lapse)


def _mass_weighted_bases(geom: SurfaceGeometry):
    grid = geom.grid
    W = grid.weights * geom.dmu
    S = grid.Y
    return S, W


def spectral_gap(op: LinearizedOperator, geom: SurfaceGeometry | None = None) -> float:
    """Smallest eigenvalue of ``f -> int f L f dmu`` over ``dmu``-mean-zero band-limited ``f``.

    The form is symmetrized and measured against ``int f^2 dmu``.
    """
    geom = op.geom if geom is None else geom
    S, W = _mass_weighted_bases(geom)
    SW = S.T * W
    Q = SW @ op.synthesized
    Q = 0.5 * (Q + Q.T)
    M = SW @ S
    c = SW.sum(axis=1)
    # orthonormal basis of the complement of c
    Z = scipy.linalg.null_space(c[None, :])
    try:
        w = scipy.linalg.eigh(Z.T @ Q @ Z, Z.T @ M @ Z, eigvals_only=True, subset_by_index=[0, 0])
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigen-solver failure: {exc}") from exc
    return float(w[0])


def quadratic_form(geom: SurfaceGeometry, family: DataFamily | None, f) -> tuple[float, float]:
    """``int f L f dmu`` evaluated directly and through the constraint decomposition."""
    family = geom.family if family is None else family
    s = family.sign
    f = geom.grid.check(f)
    op = assemble_linearization(geom, family)
    direct = geom.integrate(f * op.apply(f))
    f1, f2 = geom.gradient(f)
    df = np.stack([f1, f2], axis=1)
    grad2 = np.einsum("na,nab,nb->n", df, geom.gamma_inv, df)
    T = geom.K_T_trless + s * geom.A_trless
    T2 = np.einsum("nab,nbc,ncd,nda->n", geom.gamma_inv, T, geom.gamma_inv, T)
    bracket = 8.0 * np.pi * (geom.mu - s * geom.J_nu) + 0.5 * T2 + geom.theta_norm2
    tail = 0.5 * geom.hp**2 + (geom.H - s * geom.K_nn) ** 2 - geom.trK**2 - 2.0 * geom.G
    decomposed = geom.integrate(grad2 - f**2 * bracket - 0.5 * f**2 * tail)
    return float(direct), float(decomposed)
