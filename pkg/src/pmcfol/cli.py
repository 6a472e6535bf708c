"""Command line interface: ``pmcfol {solve,foliate,momentum,gap,verify} CONFIG``.

Exit status: 0 success, 1 a ``verify`` property failed, 2 solver
non-convergence, 3 condition-flag failure in strict mode, 4 configuration
error.  Log verbosity follows ``--verbose`` or the ``PMCFOL_LOG``
environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .geometry import GeometryError, schwarzschild_sphere_curvature
from .io import (
    FOLIATION_COLUMNS,
    GAP_COLUMNS,
    LAPSE_COLUMNS,
    foliation_row,
    format_cell,
    save_surface,
    write_csv,
)
from .momentum import center_difference_limit, center_drift_series, recover_momentum
from .solver import (
    ContinuationError,
    ConvergenceError,
    SolverError,
    assemble_linearization,
    continuation,
    foliate,
    spectral_gap,
)
from .spectral import SphericalGrid
from .verify import run_invariants

log = logging.getLogger("pmcfol")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_NONCONVERGENCE = 2
EXIT_STRICT = 3
EXIT_CONFIG = 4


def _h_values(cfg: RunConfig, need: int = 1) -> list[float]:
    hs = list(cfg.task.h_values)
    if len(hs) < need:
        raise ConfigError(f"at least {need} value(s) required", "task.h")
    return hs


def _prepare_output(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override or cfg.task.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.source, encoding="utf-8")
    return out


def _strict_status(cfg: RunConfig, results) -> int:
    bad = [r.h for r in results if not r.summary.flags_ok()]
    if bad:
        log.warning("condition flags failed for h in %s", bad)
        if cfg.task.strict:
            return EXIT_STRICT
    return EXIT_OK


def _print_rows(columns, rows):
    print(",".join(columns))
    for row in rows:
        print(",".join(format_cell(v) for v in row))


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    grid = SphericalGrid(cfg.degree)
    curve = list(cfg.task.curve) or [(_h_values(cfg)[0], 0.0), (_h_values(cfg)[0], cfg.family.tau)]
    result = continuation(cfg.family, curve, cfg.settings, grid)[-1]
    save_surface(result, out / "surface.json", cfg.family)
    row = foliation_row(result)
    write_csv(out / "summary.csv", FOLIATION_COLUMNS, [row])
    _print_rows(FOLIATION_COLUMNS, [row])
    return _strict_status(cfg, [result])


def _foliation(cfg: RunConfig, out: Path, need: int = 2):
    grid = SphericalGrid(cfg.degree)
    fol = foliate(cfg.family, _h_values(cfg, need), cfg.settings, grid)
    for i, (_, res) in enumerate(fol.members):
        save_surface(res, out / f"surface_{i:03d}.json", cfg.family)
    write_csv(out / "foliation.csv", FOLIATION_COLUMNS, [foliation_row(r) for r in fol.results])
    write_csv(out / "lapse.csv", LAPSE_COLUMNS, [tuple(rec[c] for c in LAPSE_COLUMNS) for rec in fol.lapse])
    return fol


def cmd_foliate(cfg: RunConfig, out: Path) -> int:
    fol = _foliation(cfg, out)
    _print_rows(FOLIATION_COLUMNS, [foliation_row(r) for r in fol.results])
    if not (fol.nested and fol.lapse_sign_definite):
        log.warning("foliation property violated: nested=%s lapse sign-definite=%s", fol.nested, fol.lapse_sign_definite)
    return _strict_status(cfg, fol.results)


def cmd_momentum(cfg: RunConfig, out: Path) -> int:
    fol = _foliation(cfg, out, need=3)
    series = center_drift_series(fol)
    write_csv(out / "drift.csv", series.COLUMNS, list(series.rows()))
    form = cfg.family.k_kind if cfg.family.k_kind in ("york", "corvino_schoen") else "york"
    est = recover_momentum(series, cfg.family.m, form, cfg.family.delta, cfg.family.sign_branch)
    report = est.as_dict()
    report["center_difference_last"] = float(abs(series.center_difference[-1] @ series.center_difference[-1]) ** 0.5)
    report["center_difference_limit"] = center_difference_limit(cfg.family.m, est.tau)
    text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    (out / "momentum.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return _strict_status(cfg, fol.results)


def cmd_gap(cfg: RunConfig, out: Path) -> int:
    grid = SphericalGrid(cfg.degree)
    rows = []
    m = cfg.family.m
    for r in cfg.task.gap_radii:
        h = float(schwarzschild_sphere_curvature(m, r))
        res = continuation(cfg.family, [(h, 0.0), (h, cfg.family.tau)], cfg.settings, grid)[-1]
        mu1 = spectral_gap(assemble_linearization(res.geometry, cfg.family))
        R_e = res.summary.R_e
        bound = 6.0 * m / R_e**3
        rows.append((R_e, mu1, bound, mu1 / bound if bound > 0 else float("nan")))
    write_csv(out / "gap.csv", GAP_COLUMNS, rows)
    _print_rows(GAP_COLUMNS, rows)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    checks = run_invariants(cfg.family, cfg.degree, cfg.task.seed, cfg.settings)
    lines = [c.line() for c in checks]
    (out / "verify.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


COMMANDS = {
    "solve": cmd_solve,
    "foliate": cmd_foliate,
    "momentum": cmd_momentum,
    "gap": cmd_gap,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmcfol", description="Surfaces of prescribed H +- P and their foliations.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve for a single surface and write surface.json and summary.csv",
        "foliate": "compute a foliation over the configured h values",
        "momentum": "foliate, then recover the linear momentum from the center drift",
        "gap": "tabulate the spectral gap of the linearization on centered surfaces",
        "verify": "run the invariant suite on the configured data",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", help="INI configuration file")
        sp.add_argument("-o", "--output", help="output directory (overrides task.output)")
        sp.add_argument("--strict", action="store_true", help="exit 3 when a condition flag fails")
        sp.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    env = os.environ.get("PMCFOL_LOG", "WARNING").upper()
    level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else getattr(logging, env, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.strict:
            from dataclasses import replace

            cfg = replace(cfg, task=replace(cfg.task, strict=True))
        out = _prepare_output(cfg, args.output)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (ConvergenceError, ContinuationError) as exc:
        log.error("solver did not converge: %s", exc)
        return EXIT_NONCONVERGENCE
    except (SolverError, GeometryError) as exc:
        log.error("solver failure: %s", exc)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
