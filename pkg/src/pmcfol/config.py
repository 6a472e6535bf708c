"""Run configuration: a sectioned key-value (INI) document.

Example::

    [meta]
    schema_version = 1

    [family]
    mass = 1.0
    metric_kind = schwarzschild
    k_kind = york
    momentum = 0, 0, 0.1

    [solver]
    degree = 31

    [task]
    radii = 20, 40, 80

Sections ``[perturbation]`` and ``[perturbation.termN]`` describe the metric
perturbation; without term sections the built-in two-term recipe is used.
Every unknown section or key is rejected, and every error names the key.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .ambient import (
    BRANCHES,
    K_KINDS,
    METRIC_KINDS,
    DataFamily,
    PerturbationSpec,
    PerturbationTerm,
    default_perturbation,
)
from .geometry import schwarzschild_sphere_curvature
from .solver import NewtonSettings

__all__ = [
    "ConfigError",
    "ConfigParseError",
    "ConfigRangeError",
    "ConfigSchemaError",
    "RunConfig",
    "TaskConfig",
    "SCHEMA_VERSION",
    "load_config",
    "parse_config",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Base class; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class ConfigParseError(ConfigError):
    """The document is not well-formed."""


class ConfigSchemaError(ConfigError):
    """Unknown, missing or mistyped entries."""


class ConfigRangeError(ConfigError):
    """A value lies outside its documented range."""


@dataclass(frozen=True)
class TaskConfig:
    h_values: tuple = ()
    curve: tuple = ()
    output: str = "out"
    strict: bool = False
    gap_radii: tuple = (25.0, 50.0, 100.0)
    seed: int = 0
    intrinsic: bool = True


@dataclass(frozen=True)
class RunConfig:
    family: DataFamily
    settings: NewtonSettings
    degree: int
    task: TaskConfig
    schema_version: int = SCHEMA_VERSION
    source: str = field(default="", repr=False, compare=False)


_FAMILY_KEYS = {
    "mass", "delta", "sigma", "metric_kind", "tau", "k_kind",
    "momentum", "york_coefficient", "sign_branch",
}
_PERT_KEYS = {"amplitude"}
_TERM_KEYS = {"l", "m", "weight", "matrix"}
_SOLVER_KEYS = {"degree", "tol", "max_iter", "max_halvings", "dtau", "h_ratio"}
_TASK_KEYS = {"h", "radii", "curve", "output", "strict", "gap_radii", "seed", "intrinsic"}
_META_KEYS = {"schema_version"}


def _float(sec, key, qual):
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigSchemaError(f"expected a number, got {sec[key]!r}", qual) from None


def _int(sec, key, qual):
    try:
        return int(sec[key])
    except ValueError:
        raise ConfigSchemaError(f"expected an integer, got {sec[key]!r}", qual) from None


def _bool(sec, key, qual):
    try:
        return sec.getboolean(key)
    except ValueError:
        raise ConfigSchemaError(f"expected a boolean, got {sec[key]!r}", qual) from None


def _floats(text, qual, n=None):
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigSchemaError(f"expected comma separated numbers, got {text!r}", qual) from None
    if n is not None and len(vals) != n:
        raise ConfigSchemaError(f"expected {n} numbers, got {len(vals)}", qual)
    return vals


def _check_keys(section, allowed, name):
    for key in section:
        if key not in allowed:
            raise ConfigSchemaError("unknown key", f"{name}.{key}")


def parse_config(text: str) -> RunConfig:
    """Validate a configuration document; defaults fill every omitted field."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__", inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(str(exc).splitlines()[0]) from exc

    term_sections = []
    for name in cp.sections():
        if name.startswith("perturbation.term"):
            term_sections.append(name)
        elif name not in ("meta", "family", "perturbation", "solver", "task"):
            raise ConfigSchemaError("unknown section", name)

    meta = cp["meta"] if cp.has_section("meta") else {}
    if meta:
        _check_keys(meta, _META_KEYS, "meta")
    version = _int(meta, "schema_version", "meta.schema_version") if "schema_version" in meta else SCHEMA_VERSION
    if version != SCHEMA_VERSION:
        raise ConfigSchemaError(f"unsupported schema version {version}", "meta.schema_version")

    fam_kwargs = {}
    if cp.has_section("family"):
        sec = cp["family"]
        _check_keys(sec, _FAMILY_KEYS, "family")
        for key in ("mass", "delta", "sigma", "tau"):
            if key in sec:
                fam_kwargs[key] = _float(sec, key, f"family.{key}")
        for key, allowed in (("metric_kind", METRIC_KINDS), ("k_kind", K_KINDS), ("sign_branch", BRANCHES)):
            if key in sec:
                if sec[key] not in allowed:
                    raise ConfigRangeError(f"must be one of {allowed}, got {sec[key]!r}", f"family.{key}")
                fam_kwargs[key] = sec[key]
        if "momentum" in sec:
            fam_kwargs["momentum"] = _floats(sec["momentum"], "family.momentum", 3)
        if "york_coefficient" in sec:
            fam_kwargs["york_coefficient"] = _int(sec, "york_coefficient", "family.york_coefficient")

    ranges = {
        "mass": lambda v: v >= 0,
        "delta": lambda v: v >= 0,
        "sigma": lambda v: v > 0,
        "tau": lambda v: 0.0 <= v <= 1.0,
        "york_coefficient": lambda v: v in (1, 2),
    }
    for key, ok in ranges.items():
        if key in fam_kwargs and not ok(fam_kwargs[key]):
            raise ConfigRangeError(f"value {fam_kwargs[key]} out of range", f"family.{key}")

    if cp.has_section("perturbation") or term_sections:
        sec = cp["perturbation"] if cp.has_section("perturbation") else {}
        if sec:
            _check_keys(sec, _PERT_KEYS, "perturbation")
        amp = _float(sec, "amplitude", "perturbation.amplitude") if "amplitude" in sec else 0.0
        if amp < 0:
            raise ConfigRangeError("must be nonnegative", "perturbation.amplitude")
        if term_sections:
            terms = []
            for name in sorted(term_sections):
                tsec = cp[name]
                _check_keys(tsec, _TERM_KEYS, name)
                for key in _TERM_KEYS:
                    if key not in tsec:
                        raise ConfigSchemaError("missing key", f"{name}.{key}")
                try:
                    terms.append(
                        PerturbationTerm(
                            _int(tsec, "l", f"{name}.l"),
                            _int(tsec, "m", f"{name}.m"),
                            _float(tsec, "weight", f"{name}.weight"),
                            tuple(np.reshape(_floats(tsec["matrix"], f"{name}.matrix", 9), (3, 3)).tolist()),
                        )
                    )
                except ValueError as exc:
                    if isinstance(exc, ConfigError):
                        raise
                    raise ConfigRangeError(str(exc), name) from None
            try:
                pert = PerturbationSpec(amp, tuple(terms))
            except ValueError as exc:
                raise ConfigRangeError(str(exc), "perturbation") from None
        else:
            pert = default_perturbation(amp)
        fam_kwargs["perturbation"] = pert

    if fam_kwargs.get("metric_kind") == "schwarzschild_plus_perturbation" and "perturbation" not in fam_kwargs:
        raise ConfigSchemaError("required for schwarzschild_plus_perturbation", "perturbation.amplitude")
    try:
        family = DataFamily(**fam_kwargs)
    except ValueError as exc:
        key = next((k for k in sorted(_FAMILY_KEYS) if str(exc).startswith(k) or f" {k} " in str(exc)), None)
        raise ConfigRangeError(str(exc), f"family.{key}" if key else "family") from None

    degree = 31
    set_kwargs = {}
    if cp.has_section("solver"):
        sec = cp["solver"]
        _check_keys(sec, _SOLVER_KEYS, "solver")
        if "degree" in sec:
            degree = _int(sec, "degree", "solver.degree")
            if not 2 <= degree <= 127:
                raise ConfigRangeError("must lie in [2, 127]", "solver.degree")
        for key in ("tol", "dtau", "h_ratio"):
            if key in sec:
                set_kwargs[key] = _float(sec, key, f"solver.{key}")
        for key in ("max_iter", "max_halvings"):
            if key in sec:
                set_kwargs[key] = _int(sec, key, f"solver.{key}")
    try:
        settings = NewtonSettings(**set_kwargs)
    except ValueError as exc:
        key = next((k for k in set_kwargs if k in str(exc)), None)
        raise ConfigRangeError(str(exc), f"solver.{key}" if key else "solver") from None

    task_kwargs = {}
    if cp.has_section("task"):
        sec = cp["task"]
        _check_keys(sec, _TASK_KEYS, "task")
        if "h" in sec and "radii" in sec:
            raise ConfigSchemaError("give either h or radii, not both", "task.h")
        if "h" in sec:
            hs = _floats(sec["h"], "task.h")
            if any(h <= 0 for h in hs):
                raise ConfigRangeError("values must be positive", "task.h")
            task_kwargs["h_values"] = hs
        if "radii" in sec:
            rs = _floats(sec["radii"], "task.radii")
            if any(r <= 2 * family.sigma for r in rs):
                raise ConfigRangeError("radii must exceed twice the inner radius", "task.radii")
            task_kwargs["h_values"] = tuple(float(schwarzschild_sphere_curvature(family.m, r)) for r in rs)
        if "curve" in sec:
            pts = []
            for item in sec["curve"].split(";"):
                if not item.strip():
                    continue
                vals = _floats(item.replace(":", ","), "task.curve", 2)
                if vals[0] <= 0 or not 0 <= vals[1] <= 1:
                    raise ConfigRangeError(f"bad node {item.strip()!r}", "task.curve")
                pts.append(vals)
            task_kwargs["curve"] = tuple(pts)
        if "output" in sec:
            task_kwargs["output"] = sec["output"]
        for key in ("strict", "intrinsic"):
            if key in sec:
                task_kwargs[key] = _bool(sec, key, f"task.{key}")
        if "gap_radii" in sec:
            task_kwargs["gap_radii"] = _floats(sec["gap_radii"], "task.gap_radii")
        if "seed" in sec:
            task_kwargs["seed"] = _int(sec, "seed", "task.seed")
    return RunConfig(family, settings, degree, TaskConfig(**task_kwargs), version, text)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)
