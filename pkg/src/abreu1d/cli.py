"""Command-line front end: solve / sweep / compare / verify.

Exit codes: 0 success, 1 configuration error, 2 solver nonconvergence,
3 oracle failure.  Tabular outputs are CSV (comma separator, 17 significant
digits, LF line endings, UTF-8); manifests and summaries are JSON.
"""

import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .diagnostics import EstimateReport, check_theorem_bounds, compute_report, fit_rate
from .grid import d1, d2
from .lagrangian import make_rochet_chone, make_zero
from .minimizer import BarrierOpts, ConeProblem, eval_J, minimize_direct
from .solver import NewtonOpts, _f_eps, continuation_sweep
from .weakform import default_family, distributional_residual, rescaled_w

log = logging.getLogger("abreu1d")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_ORACLE = 3

RATE_FIELDS = ("penalty_l2", "min_upp_ab", "max_w_ab", "int_inv_upp")


def _setup_logging() -> None:
    level = os.environ.get("ABREU1D_LOG", "info").lower()
    levels = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        stream=sys.stderr,
        level=levels.get(level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: Path, doc) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(outdir: Path, cfg: RunConfig, stages, timings, files) -> None:
    manifest = {
        "tool_version": __version__,
        "config": cfg.to_dict(),
        "stages": stages,
        "wall_clock_seconds": timings,
        "files": {name: _sha256(outdir / name) for name in files},
    }
    write_json(outdir / "manifest.json", manifest)


def _newton_opts(cfg: RunConfig) -> NewtonOpts:
    return NewtonOpts(
        newton_tol_scale=cfg.tolerances.newton_tol_scale,
        convexity_floor_scale=cfg.tolerances.convexity_floor_scale,
    )


def _solution_rows(setup, result):
    g = setup.grid
    u = result.u
    up = d1(u, g)
    upp = d2(u, g)
    f = _f_eps(u, upp, setup)
    return zip(g.nodes, u, up, upp, result.w, f)


def _run_sweep(cfg: RunConfig, outdir: Path):
    """Shared sweep pipeline; returns (exit_code, setups, results, reports)."""
    setup = cfg.build_setup()
    schedule = cfg.schedule()
    t0 = time.perf_counter()
    stages = continuation_sweep(setup, schedule, _newton_opts(cfg))
    elapsed = time.perf_counter() - t0

    files = []
    stage_meta = []
    for k, (stage_setup, result) in enumerate(stages):
        name = f"solution_stage{k:02d}.csv"
        write_csv(outdir / name,
                  ("x", "u", "u_prime", "u_pp", "w", "f_eps"),
                  _solution_rows(stage_setup, result))
        files.append(name)
        stage_meta.append({
            "eps": stage_setup.eps,
            "converged": result.converged,
            "newton_iters": result.newton_iters,
            "final_residual": result.residual_norms[-1],
        })

    reports = [compute_report(r, s) for s, r in stages if r.converged]
    write_csv(outdir / "sweep.csv", EstimateReport.CSV_FIELDS,
              (r.csv_row() for r in reports))
    files.append("sweep.csv")

    rate_rows = []
    for name in RATE_FIELDS:
        try:
            fit = fit_rate(reports, name)
        except ValueError:
            continue
        rate_rows.append((name, fit.slope, fit.r2, len(fit.pairs),
                          "yes" if fit.identically_small else "no"))
    write_csv(outdir / "rates.csv",
              ("quantity", "slope", "r2", "stages", "identically_small"), rate_rows)
    files.append("rates.csv")

    try:
        bounds = check_theorem_bounds(reports)
        write_json(outdir / "bounds.json", bounds.as_dict())
        files.append("bounds.json")
    except ValueError as exc:
        log.warning("bound checks skipped: %s", exc)

    all_converged = len(stages) == len(schedule) and all(r.converged for _, r in stages)
    if not all_converged:
        log.error("sweep stopped at stage %d of %d", len(stages), len(schedule))
    _write_manifest(outdir, cfg, stage_meta, {"sweep": elapsed}, files)
    return (EXIT_OK if all_converged else EXIT_SOLVER), stages, reports


def _prepare(config_path: str, out_override):
    cfg = load_config(config_path)
    if out_override:
        cfg.outputs = out_override
    outdir = Path(cfg.outputs)
    outdir.mkdir(parents=True, exist_ok=True)
    probe = outdir / ".write_probe"
    try:
        probe.touch()
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}") from exc
    return cfg, outdir


@click.group()
def main() -> None:
    """Penalized fourth-order scheme for convexity-constrained minimization."""
    _setup_logging()


def _config_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="Path to the JSON run configuration.")(fn)
    fn = click.option("--out", "out_override", default=None,
                      type=click.Path(), help="Override the output directory.")(fn)
    return fn


@main.command()
@_config_options
def solve(config_path, out_override) -> None:
    """Solve the penalized problem at a single eps."""
    try:
        cfg, outdir = _prepare(config_path, out_override)
        schedule = cfg.schedule()
        if len(schedule) != 1:
            raise ConfigError("solve requires a single-eps schedule; use sweep instead")
        setup = cfg.build_setup(schedule[0])
    except ConfigError as exc:
        log.error("%s", exc)
        sys.exit(EXIT_CONFIG)

    from .solver import newton_solve

    t0 = time.perf_counter()
    result = newton_solve(setup, setup.phi, _newton_opts(cfg))
    elapsed = time.perf_counter() - t0
    write_csv(outdir / "solution.csv",
              ("x", "u", "u_prime", "u_pp", "w", "f_eps"),
              _solution_rows(setup, result))
    _write_manifest(outdir, cfg,
                    [{"eps": setup.eps, "converged": result.converged,
                      "newton_iters": result.newton_iters,
                      "final_residual": result.residual_norms[-1]}],
                    {"solve": elapsed}, ["solution.csv"])
    if not result.converged:
        log.error("Newton did not converge (final residual %.3e)", result.residual_norms[-1])
        sys.exit(EXIT_SOLVER)
    sys.exit(EXIT_OK)


@main.command()
@_config_options
def sweep(config_path, out_override) -> None:
    """Continuation sweep over the eps schedule with diagnostics."""
    try:
        cfg, outdir = _prepare(config_path, out_override)
    except ConfigError as exc:
        log.error("%s", exc)
        sys.exit(EXIT_CONFIG)
    code, _, _ = _run_sweep(cfg, outdir)
    sys.exit(code)


@main.command()
@_config_options
def compare(config_path, out_override) -> None:
    """Run the sweep and the direct minimizer, report their agreement."""
    try:
        cfg, outdir = _prepare(config_path, out_override)
    except ConfigError as exc:
        log.error("%s", exc)
        sys.exit(EXIT_CONFIG)

    code, stages, _ = _run_sweep(cfg, outdir)
    if code != EXIT_OK:
        sys.exit(code)
    setup, result = stages[-1]
    g = setup.grid

    problem = ConeProblem(grid=g, lagrangian=setup.lagrangian, phi=setup.phi)
    opts = BarrierOpts(kkt_tol=cfg.tolerances.kkt_tol)
    oracle = minimize_direct(problem, opts)
    if oracle.kkt_residual > cfg.tolerances.kkt_tol:
        log.error("oracle failed: KKT residual %.3e > %.3e",
                  oracle.kkt_residual, cfg.tolerances.kkt_tol)
        sys.exit(EXIT_ORACLE)

    diff = np.abs(result.u - oracle.v)
    write_csv(outdir / "compare.csv",
              ("x", "u_abreu_smallest_eps", "u_direct", "abs_diff"),
              zip(g.nodes, result.u, oracle.v, diff))

    width = g.b - g.a
    inner = (g.nodes >= g.a + 0.1 * width) & (g.nodes <= g.b - 0.1 * width)
    summary = {
        "eps_smallest": setup.eps,
        "sup_diff_inner_window": float(np.max(diff[inner])),
        "J_abreu": eval_J(result.u, problem),
        "J_direct": oracle.J_value,
        "J_abs_diff": abs(eval_J(result.u, problem) - oracle.J_value),
        "oracle_kkt_residual": oracle.kkt_residual,
    }
    write_json(outdir / "compare_summary.json", summary)
    sys.exit(EXIT_OK)


@main.command()
@_config_options
def verify(config_path, out_override) -> None:
    """Weak-form residual of the limiting Euler-Lagrange identity."""
    try:
        cfg, outdir = _prepare(config_path, out_override)
    except ConfigError as exc:
        log.error("%s", exc)
        sys.exit(EXIT_CONFIG)

    code, stages, _ = _run_sweep(cfg, outdir)
    if code != EXIT_OK:
        sys.exit(code)
    setup, result = stages[-1]
    family = default_family(setup.grid)
    w_resc = rescaled_w(result, setup)
    max_res, per_bump = distributional_residual(w_resc, result.u, setup, family)
    write_csv(outdir / "el_residuals.csv",
              ("center", "radius", "residual"),
              zip(family.centers, family.radii, per_bump))
    tol = cfg.tolerances.el_residual_tol
    write_json(outdir / "verify_summary.json", {
        "eps": setup.eps,
        "max_residual": max_res,
        "tolerance": tol,
        "status": "PASS" if max_res <= tol else "FAIL",
    })
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
