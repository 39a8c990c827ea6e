"""Command line entry point: ``specloc <command> --config <path> [--out <dir>] [--seed N] [--jobs N]``.

Exit status is 0 on success, 1 on configuration or validation errors and 2
when a solver fails.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .asymptotics import convergence_study, solve_full, trace_identity_check
from .cell_problem import export_cell_csv, homogenize
from .config import RunConfig, load_config
from .effective import analytic_spectrum, build_oscillator, export_spectrum_csv, numeric_oscillator
from .errors import (
    CoefficientError,
    ConfigurationError,
    ConstraintError,
    EigensolverError,
    GeometryError,
    HypothesisError,
    InternalConsistencyError,
)
from .geometry import build_cell_mesh, build_perforated_mesh, measures

log = logging.getLogger("specloc")

VALIDATION_ERRORS = (ConfigurationError, GeometryError, CoefficientError, HypothesisError)
SOLVER_ERRORS = (EigensolverError, ConstraintError, InternalConsistencyError)


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def _write_rows(path: Path, header: str, rows) -> None:
    path.write_text("\n".join([header] + [",".join(_fmt(v) for v in r) for r in rows]) + "\n")


def _oscillator(cfg: RunConfig):
    spec = cfg.oscillator_override()
    if spec is not None:
        return spec
    corr, aeff = homogenize(build_cell_mesh(cfg.cell), cfg.a)
    return build_oscillator(aeff, corr.area, corr.perimeter, cfg.q)


def cmd_cell(cfg: RunConfig, out: Path, args) -> list[Path]:
    mesh = build_cell_mesh(cfg.cell)
    corr, aeff = homogenize(mesh, cfg.a)
    path = out / "cell.csv"
    export_cell_csv(path, aeff, corr.area, corr.perimeter)
    return [path]


def cmd_effective(cfg: RunConfig, out: Path, args) -> list[Path]:
    spec = _oscillator(cfg)
    k = cfg["effective.k"]
    spectrum = analytic_spectrum(spec, k)
    numeric = None
    if spec.dim == 2:
        box = cfg["effective.box"]
        numeric = numeric_oscillator(spec, box=box, h=cfg["effective.h"], k=k).values
    path = out / "effective.csv"
    export_spectrum_csv(path, spectrum, numeric)
    return [path]


def cmd_solve(cfg: RunConfig, out: Path, args) -> list[Path]:
    eps = cfg.eps_list[0]
    res = solve_full(
        cfg.domain(eps), cfg.a, cfg.q, k=cfg["solver.k"], tol=cfg["solver.tol"],
        shift_factor=cfg["solver.shift_factor"], hole_condition=cfg["solver.hole_condition"],
        block_size=cfg["solver.block_size"], seed=args.seed if args.seed is not None else cfg["solver.seed"],
    )
    paths = [out / "eigenvalues.csv"]
    rows = [(j + 1, res.values[j], res.mu[j], res.residuals[j]) for j in range(len(res.values))]
    _write_rows(paths[0], "j,lambda,mu_eps,residual", rows)
    x = res.mesh.vertices
    for j in range(len(res.values)):
        p = out / f"eigenfunction_{j + 1}.csv"
        u = res.vectors[:, j]
        _write_rows(p, "x1,x2,u", zip(x[:, 0], x[:, 1], u))
        paths.append(p)
    return paths


def cmd_study(cfg: RunConfig, out: Path, args) -> list[Path]:
    report = convergence_study(cfg.eps_list, cfg.study(args.seed), cfg["study.j"], jobs=args.jobs)
    paths = []
    if "csv" in cfg["output.formats"]:
        paths.append(out / "study.csv")
        report.to_csv(paths[-1])
    if "json" in cfg["output.formats"]:
        paths.append(out / "fits.json")
        paths[-1].write_text(report.fits_json() + "\n")
    for r in report.rows:
        if r.error:
            log.warning("eps=%s j=%d failed: %s", _fmt(r.eps), r.j, r.error)
    return paths


def cmd_check_trace(cfg: RunConfig, out: Path, args) -> list[Path]:
    cell_mesh = build_cell_mesh(cfg.cell)
    area, perimeter = measures(cell_mesh)
    L = cfg["geometry.L"]
    rows = []
    for eps in cfg.eps_list:
        mesh = build_perforated_mesh(cfg.domain(eps), cell_mesh)
        x = mesh.vertices
        fields = {
            "cos": np.cos(np.pi * x[:, 0] / (2 * L)) * np.cos(np.pi * x[:, 1] / (2 * L)),
            "one": np.ones(mesh.n_vertices),
        }
        for name, w in fields.items():
            gap, bound = trace_identity_check(mesh, w, perimeter / area, eps)
            rows.append((eps, name, gap, bound, gap / bound if bound > 0 else float("nan")))
    path = out / "trace.csv"
    path.write_text(
        "eps,field,gap,bound,ratio\n"
        + "".join(f"{_fmt(e)},{n},{_fmt(g)},{_fmt(b)},{_fmt(r)}\n" for e, n, g, b, r in rows)
    )
    return [path]


COMMANDS = {
    "cell": cmd_cell,
    "effective": cmd_effective,
    "solve": cmd_solve,
    "study": cmd_study,
    "check-trace": cmd_check_trace,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specloc", description="Spectral localization in perforated domains")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="flat 'section.key = value' config file")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, default=None, help="seed of the eigensolver start block")
    p.add_argument("--jobs", type=int, default=None, help="parallel study rows (default: $SPECLOC_JOBS or 1)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.jobs is None:
        env = os.environ.get("SPECLOC_JOBS", "1")
        try:
            args.jobs = max(1, int(env))
        except ValueError:
            print(f"error: SPECLOC_JOBS={env!r} is not an integer", file=sys.stderr)
            return 1
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        out = Path(args.out if args.out is not None else cfg["output.dir"])
        out.mkdir(parents=True, exist_ok=True)
        paths = COMMANDS[args.command](cfg, out, args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
