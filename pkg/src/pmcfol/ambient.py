"""Ambient initial data ``(g_tau, K_tau)`` on R^3 minus a ball.

The metric family is the spatial Schwarzschild metric ``phi^4 delta`` with
``phi = 1 + m / 2r``, optionally plus a smooth perturbation decaying like
``r^(-1-delta)``; the continuation parameter ``tau`` interpolates linearly
between pure Schwarzschild data and the target data,
``g_tau = (1 - tau) g^S + tau g`` and ``K_tau = tau K``.

All evaluators are vectorised: points have shape ``(..., 3)`` and tensors
carry the trailing index axes.  Christoffel symbols are stored as
``Gamma[..., k, i, j] = Gamma^k_ij`` and covariant derivatives of ``K`` as
``gradK[..., k, i, j] = nabla_k K_ij``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .spectral import real_sph_harm

__all__ = [
    "AmbientDomainError",
    "DataFamily",
    "ExtrinsicEval",
    "MetricEval",
    "PerturbationSpec",
    "PerturbationTerm",
    "decay_norms",
    "default_perturbation",
    "eval_extrinsic",
    "eval_metric",
    "interpolate_data",
    "schwarzschild_ricci",
]

METRIC_KINDS = ("euclidean", "schwarzschild", "schwarzschild_plus_perturbation")
K_KINDS = ("zero", "york", "corvino_schoen")
BRANCHES = ("plus", "minus")

_EYE = np.eye(3)


class AmbientDomainError(ValueError):
    """Evaluation outside the chart or with a degenerate metric."""


@dataclass(frozen=True)
class PerturbationTerm:
    """One summand ``weight * Yhat_lm(rho) * matrix`` of the metric perturbation.

    ``Yhat_lm`` is the real harmonic rescaled to Schmidt semi-normalisation,
    so ``|Yhat_lm| <= 1`` everywhere.  The matrix is symmetrised and scaled to
    unit Frobenius norm on construction.
    """

    l: int
    m: int
    weight: float
    matrix: tuple

    def __post_init__(self):
        if self.l < 0 or abs(self.m) > self.l:
            raise ValueError(f"invalid harmonic (l={self.l}, m={self.m})")
        S = np.asarray(self.matrix, dtype=float).reshape(3, 3)
        S = 0.5 * (S + S.T)
        nrm = np.linalg.norm(S)
        if nrm == 0.0:
            raise ValueError("perturbation matrix must be nonzero")
        object.__setattr__(self, "matrix", tuple(map(tuple, S / nrm)))


@dataclass(frozen=True)
class PerturbationSpec:
    """``eta * r^(-1-delta) * sum_t term_t``, with ``sum |weight| <= 1``.

    The normalisation guarantees the sampled bound
    ``|g - g^S|_F <= eta * r^(-1-delta)`` (Frobenius norm, Euclidean frame).
    """

    amplitude: float
    terms: tuple = ()

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("perturbation amplitude must be nonnegative")
        terms = tuple(self.terms)
        if sum(abs(t.weight) for t in terms) > 1.0 + 1e-12:
            raise ValueError("perturbation weights must satisfy sum |w| <= 1")
        object.__setattr__(self, "terms", terms)

    def evaluate(self, x: np.ndarray, delta: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (3, 3))
        if self.amplitude == 0.0 or not self.terms:
            return out
        r = np.linalg.norm(x, axis=-1)
        theta = np.arccos(np.clip(x[..., 2] / r, -1.0, 1.0))
        phi = np.arctan2(x[..., 1], x[..., 0])
        lmax = max(t.l for t in self.terms)
        Y = real_sph_harm(lmax, theta.ravel(), phi.ravel()).reshape(theta.shape + (-1,))
        for t in self.terms:
            yhat = np.sqrt(4.0 * np.pi / (2 * t.l + 1)) * Y[..., t.l * t.l + t.l + t.m]
            out += (t.weight * yhat)[..., None, None] * np.asarray(t.matrix)
        return self.amplitude * (r ** (-1.0 - delta))[..., None, None] * out


def default_perturbation(amplitude: float) -> PerturbationSpec:
    """Two-term recipe without rotational symmetry, used when none is configured."""
    return PerturbationSpec(
        amplitude,
        (
            PerturbationTerm(1, 0, 0.5, ((1, 0, 0), (0, -1, 0), (0, 0, 0))),
            PerturbationTerm(2, 1, 0.5, ((0, 0, 1), (0, 0, 0), (1, 0, 0))),
        ),
    )


@dataclass(frozen=True)
class DataFamily:
    """Immutable description of the ambient data ``(g_tau, K_tau)``."""

    mass: float = 1.0
    delta: float = 0.0
    sigma: float = 1.0
    metric_kind: str = "schwarzschild"
    perturbation: PerturbationSpec | None = None
    tau: float = 1.0
    k_kind: str = "zero"
    momentum: tuple = (0.0, 0.0, 0.0)
    york_coefficient: int = 1
    sign_branch: str = "plus"

    def __post_init__(self):
        if self.metric_kind not in METRIC_KINDS:
            raise ValueError(f"metric_kind must be one of {METRIC_KINDS}, got {self.metric_kind!r}")
        if self.k_kind not in K_KINDS:
            raise ValueError(f"k_kind must be one of {K_KINDS}, got {self.k_kind!r}")
        if self.sign_branch not in BRANCHES:
            raise ValueError(f"sign_branch must be one of {BRANCHES}, got {self.sign_branch!r}")
        if self.metric_kind != "euclidean" and not self.mass > 0:
            raise ValueError(f"mass must be positive for {self.metric_kind} data, got {self.mass}")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.york_coefficient not in (1, 2):
            raise ValueError("york_coefficient must be 1 or 2")
        p = tuple(float(v) for v in self.momentum)
        if len(p) != 3:
            raise ValueError("momentum must have three components")
        object.__setattr__(self, "momentum", p)
        if self.metric_kind == "schwarzschild_plus_perturbation" and self.perturbation is None:
            raise ValueError("schwarzschild_plus_perturbation requires a perturbation spec")

    @property
    def m(self) -> float:
        """Schwarzschild mass entering ``phi`` (zero for flat data)."""
        return 0.0 if self.metric_kind == "euclidean" else float(self.mass)

    @property
    def sign(self) -> int:
        """``+1`` for ``H + P = const``, ``-1`` for ``H - P = const``."""
        return 1 if self.sign_branch == "plus" else -1

    @property
    def has_perturbation(self) -> bool:
        p = self.perturbation
        return (
            self.metric_kind == "schwarzschild_plus_perturbation"
            and p is not None
            and p.amplitude > 0
            and bool(p.terms)
        )

    def replace(self, **changes) -> "DataFamily":
        return dataclasses.replace(self, **changes)


def interpolate_data(family: DataFamily, tau: float) -> DataFamily:
    """Same family with the continuation parameter set to ``tau``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return family.replace(tau=float(tau))


@dataclass(frozen=True, eq=False)
class MetricEval:
    x: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray
    ricci: np.ndarray
    scal: np.ndarray
    phi: np.ndarray


@dataclass(frozen=True, eq=False)
class ExtrinsicEval:
    K: np.ndarray
    gradK: np.ndarray
    trK: np.ndarray


def _radius(family: DataFamily, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("points must have a trailing axis of length 3")
    r = np.linalg.norm(x, axis=-1)
    if np.any(r <= family.sigma):
        raise AmbientDomainError(
            f"point inside inner boundary: |x| = {r.min():.6g} <= sigma = {family.sigma}"
        )
    return x, r


def _phi_derivs(m: float, x: np.ndarray, r: np.ndarray):
    phi = 1.0 + m / (2.0 * r)
    dphi = -m * x / (2.0 * r[..., None] ** 3)
    r3 = r[..., None, None] ** 3
    r5 = r[..., None, None] ** 5
    ddphi = -0.5 * m * (_EYE / r3 - 3.0 * x[..., :, None] * x[..., None, :] / r5)
    return phi, dphi, ddphi


def _conformal_christoffel(phi, dphi):
    # Gamma^k_ij = 2/phi (delta_ik phi_j + delta_jk phi_i - delta_ij phi_k)
    f = (2.0 / phi)[..., None, None, None]
    t1 = np.einsum("ik,...j->...kij", _EYE, dphi)
    t2 = np.einsum("jk,...i->...kij", _EYE, dphi)
    t3 = np.einsum("ij,...k->...kij", _EYE, dphi)
    return f * (t1 + t2 - t3)


def _conformal_christoffel_deriv(phi, dphi, ddphi):
    # d_l Gamma^k_ij, stored [..., l, k, i, j]
    S = (
        np.einsum("ik,...jl->...lkij", _EYE, ddphi)
        + np.einsum("jk,...il->...lkij", _EYE, ddphi)
        - np.einsum("ij,...kl->...lkij", _EYE, ddphi)
    )
    T = (
        np.einsum("ik,...j->...kij", _EYE, dphi)
        + np.einsum("jk,...i->...kij", _EYE, dphi)
        - np.einsum("ij,...k->...kij", _EYE, dphi)
    )
    return 2.0 * (
        S / phi[..., None, None, None, None]
        - np.einsum("...l,...kij->...lkij", dphi, T) / (phi**2)[..., None, None, None, None]
    )


def _ricci_from_christoffel(G, dG):
    # Ric_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik
    return (
        np.einsum("...kkij->...ij", dG)
        - np.einsum("...jkik->...ij", dG)
        + np.einsum("...kkl,...lij->...ij", G, G)
        - np.einsum("...kjl,...lik->...ij", G, G)
    )


def schwarzschild_ricci(m: float, x) -> np.ndarray:
    """Closed-form Ricci tensor ``m r^-3 phi^-2 (delta - 3 rho rho)``."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    rho = x / r[..., None]
    phi = 1.0 + m / (2.0 * r)
    fac = (m / (r**3 * phi**2))[..., None, None]
    return fac * (_EYE - 3.0 * rho[..., :, None] * rho[..., None, :])


def _fd_step(r):
    return np.maximum(1e-4 * r, 1e-6)


def _full_christoffel(family: DataFamily, x: np.ndarray):
    """Christoffels of ``g^S + tau * pert``; perturbation derivatives by central differences."""
    r = np.linalg.norm(x, axis=-1)
    m = family.m
    phi, dphi, _ = _phi_derivs(m, x, r)
    pert = family.perturbation
    g = (phi**4)[..., None, None] * _EYE + family.tau * pert.evaluate(x, family.delta)
    # dg[..., k, i, j] = d_k g_ij
    dg = (4.0 * phi**3)[..., None, None, None] * np.einsum("...k,ij->...kij", dphi, _EYE)
    hs = _fd_step(r)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        step = hs[..., None] * e
        dp = (pert.evaluate(x + step, family.delta) - pert.evaluate(x - step, family.delta)) / (
            2.0 * hs[..., None, None]
        )
        dg[..., k, :, :] += family.tau * dp
    g_inv = np.linalg.inv(g)
    low = 0.5 * (
        np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg
    )  # Gamma_{l ij}
    G = np.einsum("...kl,...lij->...kij", g_inv, low)
    return g, g_inv, G


def eval_metric(family: DataFamily, x) -> MetricEval:
    """Metric, inverse, Christoffels, Ricci and scalar curvature of ``g_tau`` at ``x``."""
    x, r = _radius(family, x)
    m = family.m
    phi, dphi, ddphi = _phi_derivs(m, x, r)
    GS = _conformal_christoffel(phi, dphi)
    RicS = schwarzschild_ricci(m, x) if m > 0 else np.zeros(x.shape[:-1] + (3, 3))
    if not (family.has_perturbation and family.tau > 0):
        g = (phi**4)[..., None, None] * _EYE
        g_inv = (phi**-4)[..., None, None] * _EYE
        return MetricEval(x, g, g_inv, GS, RicS, np.zeros(r.shape), phi)

    g, g_inv, G = _full_christoffel(family, x)
    w = np.linalg.eigvalsh(g)
    if np.any(w <= 0):
        raise AmbientDomainError("perturbed metric is not positive definite")
    dGS = _conformal_christoffel_deriv(phi, dphi, ddphi)
    hs = _fd_step(r)
    dG = np.array(dGS)
    for l in range(3):
        e = np.zeros(3)
        e[l] = 1.0
        step = hs[..., None] * e
        xp, xm = x + step, x - step
        Dp = _full_christoffel(family, xp)[2] - _conformal_christoffel(*_phi_derivs(m, xp, np.linalg.norm(xp, axis=-1))[:2])
        Dm = _full_christoffel(family, xm)[2] - _conformal_christoffel(*_phi_derivs(m, xm, np.linalg.norm(xm, axis=-1))[:2])
        dG[..., l, :, :, :] += (Dp - Dm) / (2.0 * hs[..., None, None, None])
    ric = RicS + _ricci_from_christoffel(G, dG) - _ricci_from_christoffel(GS, dGS)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    scal = np.einsum("...ij,...ij->...", g_inv, ric)
    return MetricEval(x, g, g_inv, G, ric, scal, phi)


def _k_base(family: DataFamily, x: np.ndarray, r: np.ndarray):
    """Untransported ``K`` and its coordinate gradient ``dK[..., k, i, j]``."""
    shape = x.shape[:-1]
    if family.k_kind == "zero" or family.tau == 0.0:
        return np.zeros(shape + (3, 3)), np.zeros(shape + (3, 3, 3))
    p = np.asarray(family.momentum)
    px = x @ p
    r3 = (r**3)[..., None, None]
    r5 = (r**5)[..., None, None]
    xp = x[..., :, None] * p + p[:, None] * x[..., None, :]
    xx = x[..., :, None] * x[..., None, :]
    # d_k (x_i p_j + p_i x_j) / r^3
    d_xp = (
        np.einsum("ik,j->kij", _EYE, p) + np.einsum("jk,i->kij", _EYE, p)
    ) / r3[..., None] - 3.0 * np.einsum("...ij,...k->...kij", xp, x) / r5[..., None]
    if family.k_kind == "york":
        c = float(family.york_coefficient)
        K = 1.5 * (xp / r3 - c * px[..., None, None] * (_EYE / r3 - xx / r5))
        r7 = (r**7)[..., None, None, None]
        d_trans = (
            np.einsum("k,ij->kij", p, _EYE) / r3[..., None]
            - np.einsum("k,...ij->...kij", p, xx) / r5[..., None]
            + px[..., None, None, None]
            * (
                -3.0 * np.einsum("ij,...k->...kij", _EYE, x) / r5[..., None]
                - (np.einsum("ik,...j->...kij", _EYE, x) + np.einsum("jk,...i->...kij", _EYE, x))
                / r5[..., None]
                + 5.0 * np.einsum("...ij,...k->...kij", xx, x) / r7
            )
        )
        dK = 1.5 * (d_xp - c * d_trans)
    else:
        K = 2.0 * (xp / r3 - px[..., None, None] * _EYE / r3)
        d_tr = np.einsum("k,ij->kij", p, _EYE) / r3[..., None] - 3.0 * px[..., None, None, None] * np.einsum(
            "ij,...k->...kij", _EYE, x
        ) / r5[..., None]
        dK = 2.0 * (d_xp - d_tr)
    return K, dK


def eval_extrinsic(family: DataFamily, x, metric: MetricEval | None = None) -> ExtrinsicEval:
    """``K_tau = tau K``, its ``g_tau``-covariant gradient and ``g_tau``-trace."""
    x, r = _radius(family, x)
    if metric is None:
        metric = eval_metric(family, x)
    K, dK = _k_base(family, x, r)
    K = family.tau * K
    dK = family.tau * dK
    G = metric.christoffel
    gradK = (
        dK
        - np.einsum("...lki,...lj->...kij", G, K)
        - np.einsum("...lkj,...il->...kij", G, K)
    )
    trK = np.einsum("...ij,...ij->...", metric.g_inv, K)
    return ExtrinsicEval(K, gradK, trK)


def decay_norms(family: DataFamily, radii, ndirections: int = 64, seed: int = 0) -> dict:
    """Sampled weighted norms of ``g - g^S`` and ``K`` on spheres of the given radii.

    Returns the suprema of ``r^(1+d)|g-g^S|``, ``r^(2+d)|Gamma-Gamma^S|``,
    ``r^(3+d)|Ric-Ric^S|``, ``r^(2+d)|K|`` and ``r^(3+d)|nabla K|`` over the
    probe set (Frobenius norms in the coordinate frame).
    """
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((ndirections, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.asarray(radii, dtype=float)
    x = (radii[:, None, None] * dirs[None]).reshape(-1, 3)
    r = np.linalg.norm(x, axis=-1)
    d = family.delta
    ref = family.replace(metric_kind="schwarzschild" if family.m > 0 else "euclidean", perturbation=None)
    me, mr = eval_metric(family, x), eval_metric(ref, x)
    ke = eval_extrinsic(family, x, me)
    fro = lambda a: np.sqrt(np.sum(a.reshape(a.shape[0], -1) ** 2, axis=1))
    return {
        "metric": float(np.max(r ** (1 + d) * fro(me.g - mr.g))),
        "connection": float(np.max(r ** (2 + d) * fro(me.christoffel - mr.christoffel))),
        "ricci": float(np.max(r ** (3 + d) * fro(me.ricci - mr.ricci))),
        "K": float(np.max(r ** (2 + d) * fro(ke.K))),
        "gradK": float(np.max(r ** (3 + d) * fro(ke.gradK))),
    }
