"""Center drift of the foliation and recovery of the linear momentum.

For data whose extrinsic curvature has the York form with momentum ``p`` and
mass ``m``, the leaves drift off-center with ``a_e / R_e -> tau(v) pbar``,
``v = |p| / m``.  The direction of the drift depends on the branch: with
this library's conventions the ``H + P`` branch drifts along ``+pbar`` and
the ``H - P`` branch along ``-pbar`` (pinned empirically by the acceptance
run).  Inverting the drift law gives ``|p| = 2 m tau / (1 + tau^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BRANCH_DRIFT_SIGN",
    "DriftSeries",
    "MomentumEstimate",
    "center_difference_limit",
    "center_drift_series",
    "recover_momentum",
    "tau_of_v",
    "v_of_tau",
]

FORMS = ("york", "corvino_schoen")
CS_VMAX = math.sqrt(15.0) / 4.0

#: sign s in ``a_e / R_e -> s * tau(v) * pbar`` for each equation branch
BRANCH_DRIFT_SIGN = {"plus": 1, "minus": -1}


def tau_of_v(v: float, form: str = "york") -> float:
    """Asymptotic drift magnitude for ``v = |p| / m``.

    ``york``: ``(1 - sqrt(1 - v^2)) / v`` on ``[0, 1]``.
    ``corvino_schoen``: ``(1 - sqrt(1 - 16 v^2 / 15)) / (8 v / 5)`` on
    ``[0, sqrt(15)/4)``.  Both are evaluated in a cancellation-free form
    whose value at ``v = 0`` is the limit 0.
    """
    v = float(v)
    if form == "york":
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"v must lie in [0, 1] for the york form, got {v}")
        return v / (1.0 + math.sqrt(1.0 - v * v))
    if form == "corvino_schoen":
        if not 0.0 <= v < CS_VMAX:
            raise ValueError(f"v must lie in [0, sqrt(15)/4) for the corvino_schoen form, got {v}")
        return (2.0 * v / 3.0) / (1.0 + math.sqrt(1.0 - 16.0 * v * v / 15.0))
    raise ValueError(f"form must be one of {FORMS}, got {form!r}")


def v_of_tau(tau: float, form: str = "york") -> float:
    """Inverse of :func:`tau_of_v` on ``tau in [0, 1)``."""
    tau = float(tau)
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    if form == "york":
        return 2.0 * tau / (1.0 + tau * tau)
    if form == "corvino_schoen":
        v = 15.0 * tau / (12.0 * tau * tau + 5.0)
        if v >= CS_VMAX:
            raise ValueError(f"drift {tau} is outside the range of the corvino_schoen law")
        return v
    raise ValueError(f"form must be one of {FORMS}, got {form!r}")


def center_difference_limit(m: float, tau: float) -> float:
    """Large-radius limit ``(2/3) m tau`` of ``|a_e - a_g|``."""
    return 2.0 * m * tau / 3.0


@dataclass(frozen=True, eq=False)
class DriftSeries:
    """Centers of the leaves, ordered by decreasing ``h`` (increasing ``R_e``)."""

    h: np.ndarray
    R_e: np.ndarray
    a_e: np.ndarray  # (rows, 3)
    a_g: np.ndarray

    def __post_init__(self):
        n = len(self.h)
        if not (len(self.R_e) == n and self.a_e.shape == (n, 3) and self.a_g.shape == (n, 3)):
            raise ValueError("inconsistent drift series shapes")

    @property
    def drift(self) -> np.ndarray:
        """``a_e / R_e`` per row."""
        return self.a_e / self.R_e[:, None]

    @property
    def center_difference(self) -> np.ndarray:
        return self.a_e - self.a_g

    def __len__(self) -> int:
        return len(self.h)

    def rows(self):
        for i in range(len(self)):
            yield (
                float(self.h[i]),
                float(self.R_e[i]),
                *map(float, self.a_e[i]),
                *map(float, self.a_g[i]),
                *map(float, self.drift[i]),
                *map(float, self.center_difference[i]),
            )

    COLUMNS = (
        "h", "R_e",
        "a_e_x", "a_e_y", "a_e_z",
        "a_g_x", "a_g_y", "a_g_z",
        "drift_x", "drift_y", "drift_z",
        "diff_x", "diff_y", "diff_z",
    )


def center_drift_series(fol) -> DriftSeries:
    """Tabulate both centers of every leaf of a :class:`~pmcfol.solver.FoliationResult`."""
    members = sorted(fol.members, key=lambda hr: -hr[0])
    if len(members) < 3:
        raise ValueError(f"need at least 3 leaves, got {len(members)}")
    h = np.array([m[0] for m in members])
    R = np.array([m[1].summary.R_e for m in members])
    a_e = np.array([m[1].summary.a_e for m in members])
    a_g = np.array([m[1].summary.a_g for m in members])
    return DriftSeries(h, R, a_e, a_g)


@dataclass(frozen=True)
class MomentumEstimate:
    tau: float
    direction: tuple
    momentum: tuple
    magnitude: float
    form: str
    sign_branch: str
    residual: float
    below_noise: bool = False

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "direction": list(self.direction),
            "momentum": list(self.momentum),
            "magnitude": self.magnitude,
            "form": self.form,
            "sign_branch": self.sign_branch,
            "residual": self.residual,
            "below_noise": self.below_noise,
        }


def recover_momentum(
    series: DriftSeries,
    m: float,
    form: str = "york",
    delta: float = 0.0,
    sign_branch: str = "plus",
    noise_floor: float = 1e-9,
) -> MomentumEstimate:
    """Estimate ``p`` from the drift of the largest leaves.

    The top third of rows by ``R_e`` (at least two) is fitted componentwise
    by ``a_e / R_e = d + c x`` with ``x = R_e^-delta`` (``R_e^-1`` when
    ``delta = 0``); the intercept ``d`` is the extrapolated drift.
    """
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    if sign_branch not in BRANCH_DRIFT_SIGN:
        raise ValueError(f"unknown sign branch {sign_branch!r}")
    R = np.asarray(series.R_e, dtype=float)
    if len(R) < 2:
        raise ValueError("need at least two rows")
    if np.any(np.diff(R) <= 0):
        raise ValueError("R_e must increase strictly along the series")
    k = max(2, math.ceil(len(R) / 3))
    x = R[-k:] ** (-(delta if delta > 0 else 1.0))
    y = series.drift[-k:]
    V = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    d = coef[0]
    residual = float(np.sqrt(np.mean((V @ coef - y) ** 2))) if k > 2 else 0.0
    tau = float(np.linalg.norm(d))
    if tau <= max(noise_floor, residual):
        return MomentumEstimate(0.0, (0.0, 0.0, 1.0), (0.0, 0.0, 0.0), 0.0, form, sign_branch, residual, True)
    direction = d / tau
    mag = m * v_of_tau(tau, form)
    p = BRANCH_DRIFT_SIGN[sign_branch] * mag * direction
    return MomentumEstimate(
        tau, tuple(map(float, direction)), tuple(map(float, p)), float(mag), form, sign_branch, residual
    )
