"""Geometry of radial graphs ``{u(p) p : p in S^2}`` in the ambient data.

All surface tensors live in the pushforward of the orthonormal round frame
``(e_theta, e_phi)``: ``E_1 = dX(e_theta)`` and ``E_2 = dX(e_phi)``.  Frame
components of the induced metric ``gamma_ab = g(E_a, E_b)`` are therefore
regular at the poles, and the area element ``dmu`` is expressed relative to
the round measure used by the quadrature.

Conventions: ``nu`` is the outward ``g``-unit normal and
``A_ab = g(nabla_{E_a} nu, E_b)`` so round spheres have ``H > 0``.

The intrinsic Gauss curvature is computed from ``gamma`` alone.  The pulled
back metric is written as a tangential Cartesian tensor on the unit sphere
and compared with the round metric through the difference of Levi-Civita
connections; it serves as the arbiter for the sign convention of the Gauss
equation, ``G = det A - Ric(nu, nu) + Scal / 2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .ambient import AmbientDomainError, DataFamily, eval_extrinsic, eval_metric
from .spectral import GridMismatchError, SphericalGrid, sh_analysis

__all__ = [
    "ChartDomainError",
    "ConditionConstants",
    "DegenerateGeometryError",
    "GeometryError",
    "GraphConditionError",
    "GraphSurface",
    "SurfaceGeometry",
    "SurfaceSummary",
    "B_LEVEL",
    "C_LEVEL",
    "compute_geometry",
    "evaluate_conditions",
    "hawking_mass",
    "laplace_beltrami",
    "off_center_sphere_integral",
    "schwarzschild_sphere_curvature",
    "summarize",
]

log = logging.getLogger(__name__)


class GeometryError(ValueError):
    """Base class for invalid surfaces."""


class GraphConditionError(GeometryError):
    """The surface is not a radial graph with ``g^e(nu^e, rho) > 1/2``."""


class ChartDomainError(GeometryError):
    """The surface leaves the region ``r > 2 sigma``."""


class DegenerateGeometryError(GeometryError):
    """The induced metric is not positive definite."""


def schwarzschild_sphere_curvature(m: float, r):
    """Mean curvature ``phi^-3 (2/r - m/r^2)`` of the centered sphere of radius ``r``."""
    r = np.asarray(r, dtype=float)
    phi = 1.0 + m / (2.0 * r)
    return phi**-3 * (2.0 / r - m / r**2)


def off_center_sphere_integral(k: int, l: int, R: float, a: float) -> float:
    """Closed form of ``int_{S_R(a)} r^-k cos^l(angle(N, a)) dmu^e`` for ``0 < |a| < R``.

    With ``r^2 = R^2 + |a|^2 + 2 R |a| cos`` the surface element becomes
    ``2 pi R r dr / |a|``, so the integral reduces to
    ``(2 pi R / |a|) (2 R |a|)^-l int_{R-|a|}^{R+|a|} r^(1-k) (r^2 - R^2 - |a|^2)^l dr``,
    evaluated here term by term after a binomial expansion.
    """
    a = abs(float(a))
    if not 0.0 < a < R:
        raise ValueError("need 0 < |a| < R")
    c = R * R + a * a
    lo, hi = R - a, R + a
    total = 0.0
    for j in range(l + 1):
        coef = math.comb(l, j) * (-c) ** (l - j)
        e = 1 - k + 2 * j
        if e == -1:
            total += coef * math.log(hi / lo)
        else:
            total += coef * (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
    return 2.0 * math.pi * R / a * (2.0 * R * a) ** (-l) * total


@dataclass(frozen=True, eq=False)
class GraphSurface:
    """Radial graph stored by its harmonic coefficients on ``grid``."""

    grid: SphericalGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.grid.ncoeffs,):
            raise GridMismatchError(
                f"expected {self.grid.ncoeffs} coefficients for degree {self.grid.degree}, got {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_values(cls, grid: SphericalGrid, values) -> "GraphSurface":
        return cls(grid, sh_analysis(grid, values))

    @classmethod
    def sphere(cls, grid: SphericalGrid, radius: float) -> "GraphSurface":
        c = np.zeros(grid.ncoeffs)
        c[0] = radius * np.sqrt(4.0 * np.pi)
        return cls(grid, c)

    @classmethod
    def translated_sphere(cls, grid: SphericalGrid, radius: float, center) -> "GraphSurface":
        """Euclidean sphere ``S_radius(center)`` written as a graph (needs ``|center| < radius``)."""
        a = np.asarray(center, dtype=float)
        if np.linalg.norm(a) >= radius:
            raise GraphConditionError("origin must lie inside the sphere")
        ap = grid.unit_normal @ a
        return cls.from_values(grid, ap + np.sqrt(ap**2 - a @ a + radius**2))

    @cached_property
    def values(self) -> np.ndarray:
        return self.grid.Y @ self.coeffs

    def with_coeffs(self, coeffs) -> "GraphSurface":
        return GraphSurface(self.grid, coeffs)

    def scaled(self, factor: float) -> "GraphSurface":
        return GraphSurface(self.grid, self.coeffs * factor)


def _sym2(a11, a12, a22):
    out = np.empty(a11.shape + (2, 2))
    out[..., 0, 0] = a11
    out[..., 0, 1] = out[..., 1, 0] = a12
    out[..., 1, 1] = a22
    return out


def _g(g, v, w):
    return np.einsum("...i,...ij,...j->...", v, g, w)


@dataclass(frozen=True, eq=False)
class SurfaceGeometry:
    """Per-node geometry of a graph surface; all arrays have leading axis = nodes.

    Frame-indexed fields use index 0 for ``E_1`` and 1 for ``E_2``.
    """

    surface: GraphSurface
    family: DataFamily
    X: np.ndarray
    E: np.ndarray  # (N, 2, 3)
    gamma: np.ndarray  # (N, 2, 2)
    gamma_inv: np.ndarray
    dmu: np.ndarray
    dmu_e: np.ndarray
    nu: np.ndarray
    nu_e: np.ndarray
    q: np.ndarray  # g(rho, nu): radial-to-normal speed conversion
    A: np.ndarray  # (N, 2, 2)
    H: np.ndarray
    A_norm2: np.ndarray
    det_A: np.ndarray  # determinant of the shape operator
    A_trless: np.ndarray
    tangential_christoffel: np.ndarray  # C[..., c, a, b], lower pair in (E_b after E_a) order
    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray
    ricci: np.ndarray
    scal: np.ndarray
    K: np.ndarray
    gradK: np.ndarray
    trK: np.ndarray
    K_nn: np.ndarray
    P: np.ndarray
    K_T: np.ndarray
    K_T_trless: np.ndarray
    theta: np.ndarray  # K(E_a, nu)
    ric_nn: np.ndarray
    grad_nu_K_nn: np.ndarray
    grad_nu_trK: np.ndarray
    K_norm2: np.ndarray
    J_nu: np.ndarray
    mu: np.ndarray

    @property
    def grid(self) -> SphericalGrid:
        return self.surface.grid

    @property
    def sign(self) -> int:
        return self.family.sign

    @property
    def hp(self) -> np.ndarray:
        """``H + P`` or ``H - P`` according to the family's branch."""
        return self.H + self.sign * self.P

    @property
    def theta_norm2(self) -> np.ndarray:
        return np.einsum("...a,...ab,...b->...", self.theta, self.gamma_inv, self.theta)

    @cached_property
    def G_extrinsic(self) -> np.ndarray:
        """``det A - Ric(nu,nu) + Scal/2``; agrees with the intrinsic curvature."""
        return self.det_A - self.ric_nn + 0.5 * self.scal

    @cached_property
    def G_extrinsic_flipped(self) -> np.ndarray:
        """``det A + Ric(nu,nu) - Scal/2``, the opposite sign convention (diagnostic only)."""
        return self.det_A + self.ric_nn - 0.5 * self.scal

    @cached_property
    def laplacian_coefficients(self):
        """Nodal weights ``(w11, w21, w22, w1, w2)`` with
        ``Delta f = w11 f_11 + w21 f_21 + w22 f_22 + w1 f_1 + w2 f_2`` in frame derivatives.
        """
        gi = self.gamma_inv
        C = self.tangential_christoffel
        w11, w21, w22 = gi[:, 0, 0], 2.0 * gi[:, 0, 1], gi[:, 1, 1]
        wc = -(w11[:, None] * C[:, :, 0, 0] + w21[:, None] * C[:, :, 1, 0] + w22[:, None] * C[:, :, 1, 1])
        return w11, w21, w22, wc[:, 0], wc[:, 1]

    def integrate(self, values, euclidean: bool = False) -> float:
        return float(np.dot(self.grid.weights, values * (self.dmu_e if euclidean else self.dmu)))

    # intrinsic quantities -------------------------------------------------

    def _tangential_derivative(self, F: np.ndarray) -> np.ndarray:
        """Round-sphere Euclidean derivative ``D_k F`` of Cartesian component fields.

        Returns shape ``(N, 3) + F.shape[1:]``.
        """
        grid = self.grid
        flat = F.reshape(F.shape[0], -1)
        c = grid.analysis_matrix @ flat
        d1 = grid.basis("d1") @ c
        d2 = grid.basis("d2") @ c
        e_th, e_ph = grid.frame
        D = e_th[:, :, None] * d1[:, None, :] + e_ph[:, :, None] * d2[:, None, :]
        return D.reshape((F.shape[0], 3) + F.shape[1:])

    @cached_property
    def _round_frame(self):
        e_th, e_ph = self.grid.frame
        rho = self.grid.unit_normal
        Pt = np.eye(3) - rho[:, :, None] * rho[:, None, :]
        return np.stack([e_th, e_ph], axis=1), Pt

    def _to_cartesian(self, T2: np.ndarray) -> np.ndarray:
        e, _ = self._round_frame
        return np.einsum("nab,nai,nbj->nij", T2, e, e)

    @cached_property
    def _intrinsic_connection(self):
        """Pulled-back metric, inverse and the connection difference ``C^a_bd``."""
        _, Pt = self._round_frame
        gam = self._to_cartesian(self.gamma)
        gam_inv = self._to_cartesian(self.gamma_inv)
        Dg = self._tangential_derivative(gam)
        Dg = np.einsum("nia,njb,nkab->nkij", Pt, Pt, Dg)
        low = 0.5 * (np.einsum("nbed->nebd", Dg) + np.einsum("ndeb->nebd", Dg) - np.einsum("nebd->nebd", Dg))
        C = np.einsum("nae,nebd->nabd", gam_inv, low)
        return gam, gam_inv, C

    @cached_property
    def G(self) -> np.ndarray:
        """Intrinsic Gauss curvature of ``gamma``."""
        _, Pt = self._round_frame
        gam, gam_inv, C = self._intrinsic_connection
        DC = self._tangential_derivative(C)
        nC = np.einsum("nxa,nyb,nzd,nkxyz->nkabd", Pt, Pt, Pt, DC)
        ric = (
            Pt
            + np.einsum("naabd->nbd", nC)
            - np.einsum("ndaab->nbd", nC)
            + np.einsum("naae,nebd->nbd", C, C)
            - np.einsum("nade,neab->nbd", C, C)
        )
        return 0.5 * np.einsum("nbd,nbd->n", gam_inv, ric)

    @cached_property
    def grad_A_trless_norm2(self) -> np.ndarray:
        """Pointwise ``|nabla Abar|^2`` with ``Abar`` the traceless second fundamental form."""
        _, Pt = self._round_frame
        _, gam_inv, C = self._intrinsic_connection
        Ao = self._to_cartesian(self.A_trless)
        D = np.einsum("nia,njb,nkab->nkij", Pt, Pt, self._tangential_derivative(Ao))
        nA = D - np.einsum("nlki,nlj->nkij", C, Ao) - np.einsum("nlkj,nil->nkij", C, Ao)
        return np.einsum("nka,nib,njc,nkij,nabc->n", gam_inv, gam_inv, gam_inv, nA, nA)

    def gradient(self, f) -> tuple[np.ndarray, np.ndarray]:
        """Frame derivatives ``(E_1 f, E_2 f)`` of a nodal field."""
        c = sh_analysis(self.grid, f)
        return self.grid.basis("d1") @ c, self.grid.basis("d2") @ c


def compute_geometry(surface: GraphSurface, family: DataFamily) -> SurfaceGeometry:
    """Evaluate the induced geometry of ``surface`` in the data ``family``."""
    grid = surface.grid
    c = surface.coeffs
    u = grid.Y @ c
    if not np.all(np.isfinite(u)):
        raise GeometryError("surface radius is not finite")
    if np.min(u) <= 2.0 * family.sigma:
        raise ChartDomainError(
            f"surface reaches r = {np.min(u):.6g}, below twice the inner radius {family.sigma}"
        )
    u1, u2 = grid.basis("d1") @ c, grid.basis("d2") @ c
    u11, u12, u22 = (grid.basis(k) @ c for k in ("d11", "d12", "d22"))
    rho = grid.unit_normal
    e_th, e_ph = grid.frame
    cot = grid.cot[:, None]
    U = u[:, None]

    X = U * rho
    E1 = u1[:, None] * rho + U * e_th
    E2 = u2[:, None] * rho + U * e_ph
    # second frame derivatives e_a(e_b X); the mixed entry is e_phi(e_theta X)
    X11 = u11[:, None] * rho + 2.0 * u1[:, None] * e_th - U * rho
    X21 = u12[:, None] * rho + u1[:, None] * e_ph + u2[:, None] * e_th + U * cot * e_ph
    X22 = u22[:, None] * rho + 2.0 * u2[:, None] * e_ph - U * rho - U * cot * e_th

    n = np.cross(E1, E2)
    n_e = np.linalg.norm(n, axis=1)
    nu_e = n / n_e[:, None]
    if np.min(np.einsum("ni,ni->n", nu_e, rho)) <= 0.5:
        raise GraphConditionError("Euclidean normal angle violates g^e(nu^e, rho) > 1/2")

    try:
        me = eval_metric(family, X)
        ke = eval_extrinsic(family, X, me)
    except AmbientDomainError as exc:
        raise ChartDomainError(str(exc)) from exc
    g, gi, Gam = me.g, me.g_inv, me.christoffel

    E = np.stack([E1, E2], axis=1)
    gamma = np.einsum("nai,nij,nbj->nab", E, g, E)
    det = gamma[:, 0, 0] * gamma[:, 1, 1] - gamma[:, 0, 1] ** 2
    if np.any(det <= 0) or np.any(gamma[:, 0, 0] <= 0):
        raise DegenerateGeometryError("induced metric is not positive definite")
    gamma_inv = _sym2(gamma[:, 1, 1], -gamma[:, 0, 1], gamma[:, 0, 0]) / det[:, None, None]
    dmu = np.sqrt(det)

    nu_up = np.einsum("nij,nj->ni", gi, n)
    nu = nu_up / np.sqrt(np.einsum("ni,ni->n", nu_up, n))[:, None]
    q = _g(g, rho, nu)

    def covariant(Xab, Ea, Eb):
        return Xab + np.einsum("nkij,ni,nj->nk", Gam, Ea, Eb)

    V11 = covariant(X11, E1, E1)
    V21 = covariant(X21, E2, E1)
    V22 = covariant(X22, E2, E2)
    A = _sym2(-_g(g, nu, V11), -_g(g, nu, V21), -_g(g, nu, V22))
    Ctan = np.empty((u.size, 2, 2, 2))
    for (a, b), V in (((0, 0), V11), ((1, 0), V21), ((1, 1), V22)):
        proj = np.einsum("nij,ni,ndj->nd", g, V, E)
        Ctan[:, :, a, b] = np.einsum("ncd,nd->nc", gamma_inv, proj)
    Ctan[:, :, 0, 1] = Ctan[:, :, 1, 0]

    Amix = np.einsum("nac,ncb->nab", gamma_inv, A)
    H = np.trace(Amix, axis1=1, axis2=2)
    A_norm2 = np.einsum("nab,nba->n", Amix, Amix)
    det_A = Amix[:, 0, 0] * Amix[:, 1, 1] - Amix[:, 0, 1] * Amix[:, 1, 0]
    A_trless = A - 0.5 * H[:, None, None] * gamma

    K = ke.K
    trK = ke.trK
    K_nn = _g(K, nu, nu)
    P = trK - K_nn
    K_T = np.einsum("nai,nij,nbj->nab", E, K, E)
    trKT = np.einsum("nab,nab->n", gamma_inv, K_T)
    K_T_trless = K_T - 0.5 * trKT[:, None, None] * gamma
    theta = np.einsum("nai,nij,nj->na", E, K, nu)

    ric_nn = _g(me.ricci, nu, nu)
    grad_nu_K_nn = np.einsum("nkij,nk,ni,nj->n", ke.gradK, nu, nu, nu)
    dtrK = np.einsum("nij,nkij->nk", gi, ke.gradK)
    divK = np.einsum("nki,nkij->nj", gi, ke.gradK)
    grad_nu_trK = np.einsum("nk,nk->n", dtrK, nu)
    K_norm2 = np.einsum("nia,njb,nij,nab->n", gi, gi, K, K)
    J_nu = np.einsum("nj,nj->n", dtrK - divK, nu) / (8.0 * np.pi)
    mu = (me.scal - K_norm2 + trK**2) / (16.0 * np.pi)

    return SurfaceGeometry(
        surface=surface,
        family=family,
        X=X,
        E=E,
        gamma=gamma,
        gamma_inv=gamma_inv,
        dmu=dmu,
        dmu_e=n_e,
        nu=nu,
        nu_e=nu_e,
        q=q,
        A=A,
        H=H,
        A_norm2=A_norm2,
        det_A=det_A,
        A_trless=A_trless,
        tangential_christoffel=Ctan,
        g=g,
        g_inv=gi,
        christoffel=Gam,
        ricci=me.ricci,
        scal=me.scal,
        K=K,
        gradK=ke.gradK,
        trK=trK,
        K_nn=K_nn,
        P=P,
        K_T=K_T,
        K_T_trless=K_T_trless,
        theta=theta,
        ric_nn=ric_nn,
        grad_nu_K_nn=grad_nu_K_nn,
        grad_nu_trK=grad_nu_trK,
        K_norm2=K_norm2,
        J_nu=J_nu,
        mu=mu,
    )


def laplace_beltrami(geom: SurfaceGeometry, f) -> np.ndarray:
    """Laplace-Beltrami operator of the induced metric applied to nodal values."""
    grid = geom.grid
    c = sh_analysis(grid, f)
    w11, w21, w22, w1, w2 = geom.laplacian_coefficients
    return (
        w11 * (grid.basis("d11") @ c)
        + w21 * (grid.basis("d12") @ c)
        + w22 * (grid.basis("d22") @ c)
        + w1 * (grid.basis("d1") @ c)
        + w2 * (grid.basis("d2") @ c)
    )


def hawking_mass(geom: SurfaceGeometry) -> float:
    """``|Sigma|^(1/2) (16 pi)^(-3/2) (16 pi - int H^2 dmu)``."""
    area = geom.integrate(np.ones_like(geom.H))
    return float(np.sqrt(area) / (16.0 * np.pi) ** 1.5 * (16.0 * np.pi - geom.integrate(geom.H**2)))


@dataclass(frozen=True)
class ConditionConstants:
    """Constants of the four admissibility conditions.

    1. ``R(Sigma) <= c1 * r_min``
    2. ``R(Sigma)^-1 <= c2 * min(H +- P)``
    3. ``|A|^2 <= c3 * det A`` pointwise
    4. ``|a_e| <= c4 * R_e``
    """

    c1: float
    c2: float
    c3: float
    c4: float
    label: str = "A"


B_LEVEL = ConditionConstants(8.0, 8.0, 8.0, 0.75, "B")
C_LEVEL = ConditionConstants(4.0, 4.0, 4.0, 0.875, "C")


@dataclass(frozen=True)
class SurfaceSummary:
    """Scalar diagnostics of a surface; see :func:`summarize`."""

    area: float
    area_e: float
    R_e: float
    R_g: float
    r_min: float
    r_max: float
    a_e: tuple
    a_g: tuple
    hawking_mass: float
    trless_L2: float
    grad_trless_L2: float
    hp_min: float
    hp_max: float
    convexity_margin: float
    curvature_ratio_max: float
    phi_bar: float
    H_bar: float
    H_deviation: float
    gauss_residual: float
    flags: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)

    @property
    def center_difference(self) -> np.ndarray:
        return np.asarray(self.a_e) - np.asarray(self.a_g)

    def flags_ok(self, names=("C1", "C2", "C3", "C4")) -> bool:
        return all(self.flags[n] for n in names)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["a_e"] = list(self.a_e)
        d["a_g"] = list(self.a_g)
        return d


def evaluate_conditions(summary_values: dict, constants: ConditionConstants) -> tuple[dict, dict]:
    """Flags and margins from scalar summary values (pure function)."""
    s = summary_values
    lab = constants.label
    margins = {
        f"{lab}1": constants.c1 * s["r_min"] - s["R_g"],
        f"{lab}2": constants.c2 * s["hp_min"] - 1.0 / s["R_g"],
        f"{lab}3": constants.c3 - s["curvature_ratio_max"],
        f"{lab}4": constants.c4 * s["R_e"] - float(np.linalg.norm(s["a_e"])),
    }
    flags = {k: bool(v >= 0) for k, v in margins.items()}
    return flags, margins


def summarize(geom: SurfaceGeometry, family: DataFamily | None = None, intrinsic: bool = True) -> SurfaceSummary:
    """Area radii, centers, Hawking mass, traceless norms and condition flags.

    With ``intrinsic=False`` the quantities that need the intrinsic curvature
    (``grad_trless_L2``, ``gauss_residual``) are reported as NaN.
    """
    family = geom.family if family is None else family
    u = geom.surface.values
    one = np.ones_like(u)
    area = geom.integrate(one)
    area_e = geom.integrate(one, euclidean=True)
    R_e = np.sqrt(area_e / (4.0 * np.pi))
    R_g = np.sqrt(area / (4.0 * np.pi))
    a_e = np.array([geom.integrate(geom.X[:, i], euclidean=True) for i in range(3)]) / area_e
    a_g = np.array([geom.integrate(geom.X[:, i]) for i in range(3)]) / area
    hp = geom.hp
    trless = np.einsum("nab,nbc,ncd,nda->n", geom.gamma_inv, geom.A_trless, geom.gamma_inv, geom.A_trless)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(geom.det_A > 0, geom.A_norm2 / geom.det_A, np.inf)
    m = family.m
    phi_bar = 1.0 + m / (2.0 * R_e)
    H_bar = 2.0 / (phi_bar**2 * R_e) - 2.0 * m / (phi_bar**3 * R_e**2)
    if intrinsic:
        grad_trless = float(np.sqrt(max(geom.integrate(geom.grad_A_trless_norm2), 0.0)))
        gauss_res = float(np.max(np.abs(geom.G - geom.G_extrinsic)))
    else:
        grad_trless = gauss_res = float("nan")
    values = dict(
        area=area,
        area_e=area_e,
        R_e=float(R_e),
        R_g=float(R_g),
        r_min=float(np.min(u)),
        r_max=float(np.max(u)),
        a_e=tuple(float(v) for v in a_e),
        a_g=tuple(float(v) for v in a_g),
        hawking_mass=hawking_mass(geom),
        trless_L2=float(np.sqrt(max(geom.integrate(trless), 0.0))),
        grad_trless_L2=grad_trless,
        hp_min=float(np.min(hp)),
        hp_max=float(np.max(hp)),
        convexity_margin=float(np.min(4.0 * geom.det_A - geom.A_norm2)),
        curvature_ratio_max=float(np.max(ratio)),
        phi_bar=float(phi_bar),
        H_bar=float(H_bar),
        H_deviation=float(np.max(np.abs(geom.H - H_bar)) * np.min(u) ** 2),
        gauss_residual=gauss_res,
    )
    flags, margins = {}, {}
    for level in (C_LEVEL, B_LEVEL):
        f, mg = evaluate_conditions(values, level)
        flags.update(f)
        margins.update(mg)
    return SurfaceSummary(**values, flags=flags, margins=margins)
