"""Command-line front end.

Commands:
    simulate   synthetic observation panel from a config with a full matrix
    estimate   panel + config -> draft / completed / repaired matrices + report
    study      Monte Carlo bias/stderr tables for a preset or config
    repair     standalone clamp-and-shrink of a matrix CSV
    coeffs     print factor loadings and the pair coefficient system

Exit codes: 0 success, 2 parse/input error, 3 estimation or study error,
4 repair or non-PSD error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from .blockmatrix import BlockCorrelationMatrix
from .complete import complete_panel
from .estimate import (
    MissingObservableError,
    ZeroVarianceError,
    estimate_all,
    g2_side_system,
    g2g2_system,
    loading_c,
    normalizer_d,
)
from .linsolve import SingularSystemError
from .models import KIND_G1, KIND_G2, validate_system
from .panel import ObservationPanel
from .repair import is_psd, repair
from .simulate import DEFAULT_TENORS, SimulationConfig, simulate_system
from .study import (
    DT_DAILY,
    PRESET_NAMES,
    StudyConfig,
    emit_table,
    run_study,
    table_presets,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_ESTIMATION = 3
EXIT_REPAIR = 4

ESTIMATION_ERRORS = (MissingObservableError, ZeroVarianceError, SingularSystemError)


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_simulate(args) -> int:
    try:
        cfg = hio.load_config(args.config)
    except hio.ParseError as exc:
        return _fail(EXIT_PARSE, str(exc))
    if cfg.system.full_matrix is None:
        return _fail(EXIT_PARSE, "simulate requires a 'correlation' matrix in the config")
    problems = validate_system(cfg.system)
    if problems:
        return _fail(EXIT_PARSE, "; ".join(problems))
    sim = SimulationConfig(n_steps=args.n, dt=args.dt, seed=args.seed)
    try:
        paths = simulate_system(cfg.system, sim, tenor_map=cfg.tenor_map or None)
    except ValueError as exc:
        if "positive semidefinite" in str(exc):
            return _fail(EXIT_REPAIR, str(exc))
        return _fail(EXIT_PARSE, str(exc))
    with open(args.out, "w", newline="") as f:
        hio.write_panel_csv(paths.panel, f)
    print(f"wrote panel ({sim.n_steps} steps, {len(paths.panel.keys())} series) to {args.out}")
    return EXIT_OK


def _eigenvalues(entries: np.ndarray) -> list[float] | None:
    if np.isnan(entries).any():
        return None
    return [float(v) for v in np.linalg.eigvalsh((entries + entries.T) / 2.0)]


def run_estimation_pipeline(config: hio.RunConfig, panel: ObservationPanel) -> dict:
    """Estimate, optionally complete and repair; returns matrices + report dict.

    Raises the estimation/repair exceptions of the underlying stages; the
    command wrapper maps them to exit codes.
    """
    result = estimate_all(panel, config.system, config.tenor_map or None)
    report = {
        "warnings": list(result.warnings),
        "out_of_range": result.out_of_range,
        "incomplete": result.incomplete,
        "block_sizes": list(result.draft.block_sizes),
        "labels": list(result.draft.labels),
        "condition_numbers": {
            f"{i},{j}": est.cond for (i, j), est in result.pairs.items() if est.cond
        },
        "clamp_count": None,
        "alpha_star": None,
    }
    out = {"draft": result.draft, "completed": None, "repaired": None, "report": report}

    matrix = result.draft
    if config.pipeline.complete:
        matrix = complete_panel(matrix, config.system, result.missing_mask)
        out["completed"] = matrix
    if config.pipeline.repair:
        res = repair(matrix, bound=config.pipeline.clamp_bound,
                     tol=config.pipeline.bisection_tol)
        out["repaired"] = matrix.with_entries(res.matrix)
        report["alpha_star"] = res.alpha_star
        report["clamp_count"] = res.clamp_count
        report["min_eigenvalue"] = res.min_eigenvalue
        report["eigenvalues"] = _eigenvalues(res.matrix)
        report["psd"] = True
    else:
        eig = _eigenvalues(matrix.entries)
        report["eigenvalues"] = eig
        report["psd"] = bool(eig is not None and min(eig) >= -1e-10)
        if not report["psd"]:
            report["warnings"].append("matrix is not PSD (repair disabled)")
    return out


def cmd_estimate(args) -> int:
    try:
        cfg = hio.load_config(args.config)
        with open(args.panel, newline="") as f:
            times, columns = hio.read_panel_csv(f)
        panel = hio.bind_panel(times, columns, cfg.columns or None)
    except OSError as exc:
        return _fail(EXIT_PARSE, str(exc))
    except hio.ParseError as exc:
        return _fail(EXIT_PARSE, str(exc))
    problems = [v for v in validate_system(cfg.system) if "full matrix" not in v]
    if problems:
        return _fail(EXIT_PARSE, "; ".join(problems))

    if args.no_complete:
        cfg = hio.RunConfig(cfg.system, cfg.tenor_map, cfg.columns,
                            hio.PipelineOptions(False, cfg.pipeline.repair,
                                                cfg.pipeline.clamp_bound,
                                                cfg.pipeline.bisection_tol))
    if args.no_repair:
        cfg = hio.RunConfig(cfg.system, cfg.tenor_map, cfg.columns,
                            hio.PipelineOptions(cfg.pipeline.complete, False,
                                                cfg.pipeline.clamp_bound,
                                                cfg.pipeline.bisection_tol))
    if args.bound is not None or args.tol is not None:
        p = cfg.pipeline
        cfg = hio.RunConfig(cfg.system, cfg.tenor_map, cfg.columns,
                            hio.PipelineOptions(p.complete, p.repair,
                                                args.bound if args.bound is not None else p.clamp_bound,
                                                args.tol if args.tol is not None else p.bisection_tol))

    try:
        result = run_estimation_pipeline(cfg, panel)
    except MissingObservableError as exc:
        return _fail(EXIT_PARSE, str(exc))
    except ESTIMATION_ERRORS as exc:
        return _fail(EXIT_ESTIMATION, str(exc))
    except ValueError as exc:
        if "positive semidefinite" in str(exc):
            return _fail(EXIT_REPAIR, str(exc))
        return _fail(EXIT_ESTIMATION, str(exc))

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in ("draft", "completed", "repaired"):
        bcm = result[name]
        if bcm is not None:
            with open(outdir / f"{name}.csv", "w", newline="") as f:
                hio.write_matrix_csv(bcm.labels, bcm.entries, f)
    with open(outdir / "report.json", "w") as f:
        json.dump(result["report"], f, indent=2)
        f.write("\n")
    print(f"wrote {outdir}/draft.csv"
          + (", completed.csv" if result["completed"] is not None else "")
          + (", repaired.csv" if result["repaired"] is not None else "")
          + ", report.json")
    return EXIT_OK


def cmd_study(args) -> int:
    tenor_map = None
    try:
        if args.preset:
            system = table_presets(args.preset)
        else:
            cfg = hio.load_config(args.config)
            system = cfg.system
            tenor_map = cfg.tenor_map or None
            if system.full_matrix is None:
                return _fail(EXIT_PARSE, "study requires a 'correlation' matrix in the config")
    except (hio.ParseError, ValueError) as exc:
        return _fail(EXIT_PARSE, str(exc))

    config = StudyConfig(
        system=system, n_steps=args.n, dt=args.dt, n_trials=args.trials,
        misspec_factor=args.factor, base_seed=args.seed, n_jobs=args.jobs,
        tenor_map=tenor_map,
    )
    try:
        report = run_study(config)
    except ValueError as exc:
        return _fail(EXIT_PARSE, str(exc))
    except RuntimeError as exc:
        return _fail(EXIT_ESTIMATION, str(exc))

    text = emit_table(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    if report.n_failed:
        print(f"note: {report.n_failed} trial(s) failed and were dropped", file=sys.stderr)
    return EXIT_OK


def cmd_repair(args) -> int:
    try:
        with open(args.matrix, newline="") as f:
            labels, M = hio.read_matrix_csv(f)
        sizes = tuple(int(s) for s in args.block_sizes.split(","))
    except (OSError, hio.ParseError, ValueError) as exc:
        return _fail(EXIT_PARSE, str(exc))
    if sum(sizes) != M.shape[0]:
        return _fail(EXIT_PARSE, f"block sizes {sizes} do not sum to {M.shape[0]}")
    if np.abs(M - M.T).max() > 1e-8:
        return _fail(EXIT_PARSE, "input matrix is not symmetric")
    draft = BlockCorrelationMatrix(M, sizes, labels)
    try:
        res = repair(draft, bound=args.bound, tol=args.tol)
    except ValueError as exc:
        return _fail(EXIT_REPAIR, str(exc))
    if args.out:
        with open(args.out, "w", newline="") as f:
            hio.write_matrix_csv(labels, res.matrix, f)
    print(json.dumps({
        "alpha_star": res.alpha_star,
        "clamp_count": res.clamp_count,
        "min_eigenvalue": res.min_eigenvalue,
        "psd": bool(is_psd(res.matrix)),
    }, indent=2))
    return EXIT_OK


def cmd_coeffs(args) -> int:
    try:
        cfg = hio.load_config(args.config)
    except hio.ParseError as exc:
        return _fail(EXIT_PARSE, str(exc))
    i, j = args.pair
    comps = cfg.system.components
    if not (0 <= i < len(comps) and 0 <= j < len(comps)) or i == j:
        return _fail(EXIT_PARSE, f"invalid pair ({i}, {j}) for {len(comps)} components")

    def tenors_of(k):
        return cfg.tenor_map.get(k, DEFAULT_TENORS)

    for k in (i, j):
        comp = comps[k]
        if comp.kind == KIND_G2:
            p = comp.params
            for tau in tenors_of(k):
                c1 = loading_c(p.a, p.sigma, tau)
                c2 = loading_c(p.b, p.eta, tau)
                d = normalizer_d(p.a, p.b, p.sigma, p.eta, tau, p.rho_xy)
                print(f"component {k} tau={tau:g}: c_a={c1:.10g} c_b={c2:.10g} d={d:.10g}")
        elif comp.kind == KIND_G1:
            p = comp.params
            for tau in tenors_of(k)[:1]:
                print(f"component {k} tau={tau:g}: c_a={loading_c(p.a, p.sigma, tau):.10g}")

    ki, kj = comps[i].kind, comps[j].kind
    system = None
    if ki == KIND_G2 and kj == KIND_G2:
        system = g2g2_system(comps[i].params, comps[j].params, tenors_of(i)[:2], tenors_of(j)[:2])
    elif ki == KIND_G2:
        system = g2_side_system(comps[i].params, tenors_of(i)[:2])
    elif kj == KIND_G2:
        system = g2_side_system(comps[j].params, tenors_of(j)[:2])
    if system is not None:
        print(f"system matrix (unknowns {', '.join(system.unknown_labels)}):")
        for row in system.matrix:
            print("  " + "  ".join(f"{v: .10g}" for v in row))
        print(f"condition number: {system.cond:.6g}")
    else:
        print("pair needs no coefficient system (empirical correlations pass through)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hybridcorr",
        description="Instantaneous correlation estimation for hybrid rate/equity systems",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic observation panel CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=10_000, help="number of time steps")
    p.add_argument("--dt", type=float, default=DT_DAILY, help="step size in years")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate, complete and repair from a panel CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--panel", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-complete", action="store_true")
    p.add_argument("--no-repair", action="store_true")
    p.add_argument("--bound", type=float, default=None, help="clamp bound (default 0.999)")
    p.add_argument("--tol", type=float, default=None, help="bisection tolerance (default 1e-6)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("study", help="Monte Carlo bias/stderr study")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=PRESET_NAMES)
    g.add_argument("--config")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--dt", type=float, default=DT_DAILY)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--factor", type=float, default=1.0,
                   help="misspecification factor on rate-model parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("repair", help="clamp and shrink a matrix CSV to PSD")
    p.add_argument("--matrix", required=True)
    p.add_argument("--block-sizes", required=True, help="comma-separated, e.g. 2,2")
    p.add_argument("--bound", type=float, default=0.999)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("coeffs", help="print loadings and the pair system matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--pair", type=int, nargs=2, metavar=("I", "J"), default=(0, 1))
    p.set_defaults(func=cmd_coeffs)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
