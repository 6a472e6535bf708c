"""Pseudospectral scalar calculus on the unit sphere.

The grid is a Gauss-Legendre x equiangular product: ``L + 1`` colatitudes at
the roots of the Legendre polynomial in ``cos(theta)`` and ``2L + 2`` equally
spaced longitudes.  No node lies on a pole.

Real, orthonormal spherical harmonics are used throughout::

    Y_l0  = Pbar_l0(cos theta)
    Y_lm  = sqrt(2) Pbar_lm(cos theta) cos(m phi)      m > 0
    Y_l-m = sqrt(2) Pbar_lm(cos theta) sin(m phi)      m > 0

with ``Pbar`` the fully normalised associated Legendre functions *without*
the Condon-Shortley phase.  Coefficients are stored with ``l`` ascending and
``m`` running from ``-l`` to ``l``; the flat index of ``(l, m)`` is
``l*l + l + m``.

Tangential derivatives are expressed in the orthonormal frame of the round
sphere, ``e_theta`` and ``e_phi``.  First derivatives are returned as
``(d_theta f, sin(theta)^-1 d_phi f)``; second derivatives as
``(d_theta^2 f, sin^-1 d_theta d_phi f, sin^-2 d_phi^2 f)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "GridMismatchError",
    "SphericalGrid",
    "coeff_index",
    "legendre_tables",
    "quadrature",
    "real_sph_harm",
    "sh_analysis",
    "sh_synthesis",
    "surface_derivative",
]


class GridMismatchError(ValueError):
    """Field values do not match the node count of the grid."""


def coeff_index(l: int, m: int) -> int:
    """Flat index of the real harmonic ``(l, m)``."""
    if abs(m) > l:
        raise ValueError(f"|m| must not exceed l, got l={l}, m={m}")
    return l * l + l + m


def legendre_tables(lmax: int, theta: np.ndarray):
    """Normalised associated Legendre functions and helpers.

    Returns ``(P, Q, dP)`` of shape ``(lmax + 1, lmax + 1, len(theta))``
    indexed ``[l, m, node]`` where ``P`` is ``Pbar_lm(cos theta)``,
    ``Q = P / sin(theta)`` (zero for ``m = 0``, computed without division)
    and ``dP = d/dtheta P``.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = np.sin(theta)
    n = lmax + 1
    P = np.zeros((n + 1, n + 1, theta.size))
    Q = np.zeros_like(P)
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, n + 1):
        fac = np.sqrt((2.0 * m + 1.0) / (2.0 * m))
        Q[m, m] = fac * P[m - 1, m - 1]
        P[m, m] = s * Q[m, m]
    for m in range(0, n + 1):
        if m + 1 <= n:
            c = np.sqrt(2.0 * m + 3.0)
            P[m + 1, m] = c * x * P[m, m]
            Q[m + 1, m] = c * x * Q[m, m]
        for l in range(m + 2, n + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
            Q[l, m] = a * (x * Q[l - 1, m] - b * Q[l - 2, m])
    Q[:, 0] = 0.0

    dP = np.zeros((n, n, theta.size))
    for l in range(n):
        dP[l, 0] = -np.sqrt(l * (l + 1.0)) * P[l, 1]
        for m in range(1, l + 1):
            dP[l, m] = 0.5 * (
                np.sqrt((l + m) * (l - m + 1.0)) * P[l, m - 1]
                - np.sqrt((l + m + 1.0) * (l - m)) * P[l, m + 1]
            )
    return P[:n, :n], Q[:n, :n], dP


def real_sph_harm(lmax: int, theta, phi, derivatives: bool = False):
    """Evaluate all real harmonics up to ``lmax`` at points ``(theta, phi)``.

    ``theta`` and ``phi`` are 1-d arrays of equal length.  Returns ``Y`` of
    shape ``(npoints, (lmax+1)**2)``.  With ``derivatives=True`` a dict with
    keys ``"Y", "d1", "d2", "d11", "d12", "d22"`` is returned holding the
    frame derivatives listed in the module docstring.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    P, Q, dP = legendre_tables(lmax, theta)
    s = np.sin(theta)
    cot = np.cos(theta) / s
    nc = (lmax + 1) ** 2
    out = {k: np.zeros((theta.size, nc)) for k in ("Y", "d1", "d2", "d11", "d12", "d22")}
    sqrt2 = np.sqrt(2.0)
    for l in range(lmax + 1):
        ll = l * (l + 1.0)
        for m in range(-l, l + 1):
            k = coeff_index(l, m)
            am = abs(m)
            if m == 0:
                trig, dtrig = np.ones_like(phi), np.zeros_like(phi)
                norm = 1.0
            elif m > 0:
                trig, dtrig = np.cos(m * phi), -m * np.sin(m * phi)
                norm = sqrt2
            else:
                trig, dtrig = np.sin(am * phi), am * np.cos(am * phi)
                norm = sqrt2
            p, q, dp = P[l, am], Q[l, am], dP[l, am]
            Y = norm * p * trig
            out["Y"][:, k] = Y
            if not derivatives:
                continue
            d1 = norm * dp * trig
            out["d1"][:, k] = d1
            # (1/sin) d_phi: trig derivative carries the factor m
            out["d2"][:, k] = norm * q * dtrig
            out["d12"][:, k] = norm * dp * dtrig / s
            # (1/sin^2) d_phi^2 = -m^2 Y / sin^2
            d22 = -am * am * norm * q * trig / s
            out["d22"][:, k] = d22
            # Legendre ODE: d_theta^2 Y = -l(l+1) Y - cot d_theta Y - d22
            out["d11"][:, k] = -ll * Y - cot * d1 - d22
    return out if derivatives else out["Y"]


def _gauss_legendre(n: int):
    """Gauss-Legendre nodes, weights and polar angles refined in extended precision.

    ``leggauss`` nodes carry errors near 1e-16 that the harmonic transforms
    amplify; a few Newton steps in ``longdouble`` remove them.
    """
    x = np.polynomial.legendre.leggauss(n)[0].astype(np.longdouble)

    def legendre_pair(x):
        p0, p1 = np.ones_like(x), x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        return p1, n * (x * p1 - p0) / (x * x - 1)

    for _ in range(3):
        p, dp = legendre_pair(x)
        x = x - p / dp
    _, dp = legendre_pair(x)
    w = 2 / ((1 - x * x) * dp * dp)
    return x.astype(float), w.astype(float), np.arccos(x).astype(float)


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Gauss-Legendre x equiangular grid of band limit ``degree``.

    Node values are flattened with colatitude as the slow index.
    """

    degree: int
    theta: np.ndarray = field(init=False, repr=False)
    phi: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L = int(self.degree)
        if L < 1:
            raise ValueError(f"grid degree must be a positive integer, got {self.degree}")
        object.__setattr__(self, "degree", L)
        x, w, th1 = _gauss_legendre(L + 1)
        # north to south
        x, w, th1 = x[::-1], w[::-1], th1[::-1]
        ph1 = 2.0 * np.pi * np.arange(2 * L + 2) / (2 * L + 2)
        T, Ph = np.meshgrid(th1, ph1, indexing="ij")
        object.__setattr__(self, "theta", T.ravel())
        object.__setattr__(self, "phi", Ph.ravel())
        W = np.outer(w, np.full(2 * L + 2, np.pi / (L + 1)))
        object.__setattr__(self, "weights", W.ravel())

    @property
    def size(self) -> int:
        """Number of nodes ``(L+1)(2L+2)``."""
        return self.theta.size

    @property
    def ncoeffs(self) -> int:
        return (self.degree + 1) ** 2

    @cached_property
    def _basis(self) -> dict:
        return real_sph_harm(self.degree, self.theta, self.phi, derivatives=True)

    @property
    def Y(self) -> np.ndarray:
        """Synthesis matrix, shape ``(nodes, ncoeffs)``."""
        return self._basis["Y"]

    def basis(self, which: str) -> np.ndarray:
        """Frame derivative of the synthesis matrix (``"d1"``, ``"d12"``, ...)."""
        return self._basis[which]

    @cached_property
    def analysis_matrix(self) -> np.ndarray:
        """Quadrature projection onto the harmonics, shape ``(ncoeffs, nodes)``."""
        return self.Y.T * self.weights

    @cached_property
    def unit_normal(self) -> np.ndarray:
        """Radial unit vectors ``rho`` at the nodes, shape ``(nodes, 3)``."""
        st, ct = np.sin(self.theta), np.cos(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), ct], axis=-1)

    @cached_property
    def frame(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal round frame ``(e_theta, e_phi)`` at the nodes."""
        st, ct = np.sin(self.theta), np.cos(self.theta)
        cp, sp = np.cos(self.phi), np.sin(self.phi)
        e_th = np.stack([ct * cp, ct * sp, -st], axis=-1)
        e_ph = np.stack([-sp, cp, np.zeros_like(cp)], axis=-1)
        return e_th, e_ph

    @cached_property
    def cot(self) -> np.ndarray:
        return np.cos(self.theta) / np.sin(self.theta)

    @cached_property
    def degrees(self) -> np.ndarray:
        """Degree ``l`` of each coefficient slot."""
        return np.concatenate([np.full(2 * l + 1, l) for l in range(self.degree + 1)])

    def check(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.size:
            raise GridMismatchError(
                f"field has {values.shape[0]} values, grid degree {self.degree} has {self.size} nodes"
            )
        return values

    def random_field(self, rng: np.random.Generator, lmax: int | None = None, decay: float = 0.0):
        """Random band-limited field: coefficients ~ N(0,1) * (1+l)^-decay."""
        lmax = self.degree if lmax is None else min(lmax, self.degree)
        c = rng.standard_normal(self.ncoeffs) * (1.0 + self.degrees) ** (-decay)
        c[self.degrees > lmax] = 0.0
        return self.Y @ c


def sh_analysis(grid: SphericalGrid, values) -> np.ndarray:
    """Harmonic coefficients of nodal values (exact for band-limited fields)."""
    return grid.analysis_matrix @ grid.check(values)


def sh_synthesis(grid: SphericalGrid, coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != grid.ncoeffs:
        raise GridMismatchError(
            f"expected {grid.ncoeffs} coefficients for degree {grid.degree}, got {coeffs.shape[0]}"
        )
    return grid.Y @ coeffs


def surface_derivative(grid: SphericalGrid, values, second: bool = False):
    """Frame derivatives of a nodal field.

    The field is projected onto degree ``grid.degree`` first, so values that
    are not band-limited are differentiated through their truncation.
    """
    f = grid.check(values)
    # constant shifts have zero derivative; removing the mean keeps them exact
    c = sh_analysis(grid, f - f.mean(axis=0))
    first = (grid.basis("d1") @ c, grid.basis("d2") @ c)
    if not second:
        return first
    return first, tuple(grid.basis(k) @ c for k in ("d11", "d12", "d22"))


def quadrature(grid: SphericalGrid, values, area_element=None) -> float:
    """Integral of ``values * area_element`` against the round measure."""
    f = grid.check(values)
    if area_element is not None:
        f = f * grid.check(area_element)
    return float(np.dot(grid.weights, f))
