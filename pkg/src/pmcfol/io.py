"""Serialization of surfaces and diagnostic tables.

Surface files are JSON documents with sorted keys.  Floats are written with
Python's shortest round-trip representation, so write-read-write is
byte-identical and coefficients are recovered exactly.  Harmonic
coefficients of ``u`` are stored in ``(l ascending, m from -l to l)`` order.

CSV tables use ``format(x, ".16e")`` (17 significant digits, lowercase
exponent) for every float so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ambient import DataFamily
from .geometry import GraphSurface
from .spectral import SphericalGrid

__all__ = [
    "FOLIATION_COLUMNS",
    "GAP_COLUMNS",
    "LAPSE_COLUMNS",
    "FingerprintWarning",
    "SurfaceFile",
    "SurfaceSchemaError",
    "family_fingerprint",
    "format_cell",
    "format_float",
    "foliation_row",
    "load_surface",
    "save_surface",
    "write_csv",
]

log = logging.getLogger(__name__)

SURFACE_SCHEMA = 1

FOLIATION_COLUMNS = (
    "h", "tau", "R_e", "r_min",
    "a_e_x", "a_e_y", "a_e_z",
    "a_g_x", "a_g_y", "a_g_z",
    "m_H", "trless_L2", "hp_min", "hp_max", "convexity_margin",
    "C1", "C2", "C3", "C4",
    "iterations", "residual",
)
GAP_COLUMNS = ("R_e", "mu1", "bound", "ratio")
LAPSE_COLUMNS = ("h", "h_next", "lapse_min", "lapse_max", "sign_definite", "nesting_margin")


class SurfaceSchemaError(ValueError):
    """A surface file does not match the expected layout or grid."""


class FingerprintWarning(UserWarning):
    """A surface was produced with different ambient data."""


def family_fingerprint(family: DataFamily) -> str:
    """Short stable hash of every field of the data family."""
    payload = json.dumps(dataclasses.asdict(family), sort_keys=True, default=list)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass(frozen=True)
class SurfaceFile:
    degree: int
    coefficients: tuple
    h: float
    tau: float
    sign_branch: str
    fingerprint: str
    summary: dict
    schema_version: int = SURFACE_SCHEMA

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "header": {
                "degree": self.degree,
                "h": self.h,
                "tau": self.tau,
                "sign_branch": self.sign_branch,
                "fingerprint": self.fingerprint,
            },
            "coefficients": list(self.coefficients),
            "summary": _clean(self.summary),
        }
        return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SurfaceFile":
        try:
            doc = json.loads(text)
            hdr = doc["header"]
            sf = cls(
                degree=int(hdr["degree"]),
                coefficients=tuple(float(c) for c in doc["coefficients"]),
                h=float(hdr["h"]),
                tau=float(hdr["tau"]),
                sign_branch=str(hdr["sign_branch"]),
                fingerprint=str(hdr["fingerprint"]),
                summary=dict(doc.get("summary", {})),
                schema_version=int(doc["schema_version"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SurfaceSchemaError(f"malformed surface file: {exc}") from exc
        if sf.schema_version != SURFACE_SCHEMA:
            raise SurfaceSchemaError(f"unsupported surface schema {sf.schema_version}")
        if len(sf.coefficients) != (sf.degree + 1) ** 2:
            raise SurfaceSchemaError(
                f"{len(sf.coefficients)} coefficients do not match degree {sf.degree}"
            )
        return sf


def save_surface(result, path, family: DataFamily | None = None) -> SurfaceFile:
    """Write a converged :class:`~pmcfol.solver.SolveResult` to ``path``."""
    if not result.converged:
        raise ValueError("only converged results are serialized")
    family = family or result.geometry.family
    sf = SurfaceFile(
        degree=result.surface.grid.degree,
        coefficients=tuple(float(c) for c in result.surface.coeffs),
        h=float(result.h),
        tau=float(result.tau),
        sign_branch=family.sign_branch,
        fingerprint=family_fingerprint(family),
        summary=result.summary.as_dict(),
    )
    Path(path).write_text(sf.to_json(), encoding="utf-8")
    return sf


def load_surface(path, grid: SphericalGrid | None = None, family: DataFamily | None = None):
    """Read a surface file; returns ``(GraphSurface, SurfaceFile)``.

    A degree mismatch with ``grid`` raises :class:`SurfaceSchemaError`; a
    fingerprint mismatch with ``family`` only emits :class:`FingerprintWarning`.
    """
    sf = SurfaceFile.from_json(Path(path).read_text(encoding="utf-8"))
    if grid is None:
        grid = SphericalGrid(sf.degree)
    elif grid.degree != sf.degree:
        raise SurfaceSchemaError(f"file has degree {sf.degree}, grid has degree {grid.degree}")
    if family is not None and family_fingerprint(family) != sf.fingerprint:
        msg = f"{path}: family fingerprint {sf.fingerprint} differs from {family_fingerprint(family)}"
        log.warning(msg)
        warnings.warn(msg, FingerprintWarning, stacklevel=2)
    return GraphSurface(grid, np.array(sf.coefficients)), sf


def format_float(x) -> str:
    return format(float(x), ".16e")


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
            w.writerow([format_cell(v) for v in row])


def foliation_row(result) -> tuple:
    s = result.summary
    return (
        result.h, result.tau, s.R_e, s.r_min,
        *s.a_e, *s.a_g,
        s.hawking_mass, s.trless_L2, s.hp_min, s.hp_max, s.convexity_margin,
        s.flags["C1"], s.flags["C2"], s.flags["C3"], s.flags["C4"],
        result.iterations, result.residual,
    )
