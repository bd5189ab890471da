"""Command-line entry point.

Subcommands: simulate, picard, spectrum, decay-fit, check, convergence.
Exit codes: 0 success, 2 config error, 3 hypothesis failure, 4 solver
divergence or blow-up.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .decay import fit_decay
from .errors import (ConfigError, NonPositiveSamples, PlateflowError,
                     WindowTooSmall)
from .experiments import (EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_OK, EXIT_SOLVER,
                          ExperimentConfig, convergence_study,
                          read_trajectory_csv, run_experiment, write_decay_csv)
from .norms import HypothesisParams, check_hypotheses
from .operators import CouplingMatrix, spectral_bound
from .spectral import Grid


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plateflow",
        description="Spectral thermoelastic-plate simulator and analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="experiment config file")
        p.add_argument("--force", action="store_true",
                       help="run even if the hypothesis check fails")
        p.add_argument("--seed", type=int, default=None,
                       help="override the initial-data seed")
        p.add_argument("--out", default=None, help="output directory")

    add_common(sub.add_parser("simulate", help="time-step an experiment"))
    add_common(sub.add_parser("picard", help="run the fixed-point solver"))

    p_spec = sub.add_parser("spectrum", help="print the coupling-matrix spectrum")
    p_spec.add_argument("--config", default=None)
    p_spec.add_argument("--n", type=int, default=1, help="spatial dimension")
    p_spec.add_argument("--N", type=int, default=64, help="modes per axis")
    p_spec.add_argument("--csv", default=None, help="also write the report as CSV")

    p_fit = sub.add_parser("decay-fit", help="fit a decay rate to a trajectory CSV")
    p_fit.add_argument("--input", required=True, help="trajectory CSV to fit")
    p_fit.add_argument("--t-lo", type=float, required=True)
    p_fit.add_argument("--t-hi", type=float, required=True)
    p_fit.add_argument("--method", choices=("regression", "envelope"),
                       default="envelope")
    p_fit.add_argument("--column", default="norm_Xpmu")
    p_fit.add_argument("--n", type=int, default=1,
                       help="spatial dimension (for the s(A) comparison)")
    p_fit.add_argument("--out", default=None, help="write a decay CSV here")

    p_check = sub.add_parser("check", help="evaluate the regime hypotheses")
    p_check.add_argument("--config", default=None)
    p_check.add_argument("--n", type=int, default=None)
    p_check.add_argument("--p", type=float, default=None)
    p_check.add_argument("--mu", type=float, default=None)
    p_check.add_argument("--omega", type=float, default=None)
    p_check.add_argument("--N", type=int, default=64)

    p_conv = sub.add_parser("convergence", help="refinement study in h or N")
    add_common(p_conv)
    p_conv.add_argument("--axis", choices=("h", "N"), default="h")

    return parser


def _cmd_run(args, mode: str) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    result = run_experiment(cfg, out_dir=args.out, mode=mode, force=args.force,
                            seed=args.seed)
    for msg in result.messages:
        print(msg)
    if result.report_txt is not None:
        print(f"report: {result.report_txt}")
    if result.trajectory_csv is not None:
        print(f"trajectory: {result.trajectory_csv}")
    if result.fit is not None:
        print(f"omega_fit = {result.fit.omega_fit:.6g} "
              f"(rel gap to -s(A): {result.fit.rel_gap:.3g})")
    return result.exit_code


def _cmd_spectrum(args) -> int:
    n, N = args.n, args.N
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        n, N = cfg.grid.n, cfg.grid.N
    report = spectral_bound(CouplingMatrix(), Grid(n, N))
    print(report.as_text())
    if args.csv:
        Path(args.csv).write_text("\n".join(report.csv_rows()) + "\n",
                                  encoding="utf-8")
        print(f"csv: {args.csv}")
    return EXIT_OK


def _cmd_decay_fit(args) -> int:
    cols, status = read_trajectory_csv(args.input)
    if status != "completed":
        print(f"warning: trajectory status is {status!r}")
    if args.column not in cols:
        raise ConfigError(f"column {args.column!r} not in trajectory CSV",
                          key=args.column)
    s_a = spectral_bound(CouplingMatrix(), Grid(args.n, 8)).s_A
    try:
        fit = fit_decay(cols["t"], cols[args.column], (args.t_lo, args.t_hi),
                        method=args.method, s_A=s_a)
    except (NonPositiveSamples, WindowTooSmall) as err:
        print(f"fit failed: {err}")
        return EXIT_SOLVER
    print(f"method     = {fit.method}")
    print(f"window     = [{fit.t_lo:g}, {fit.t_hi:g}]")
    print(f"omega_fit  = {fit.omega_fit:.8f}")
    print(f"intercept  = {fit.intercept:.8f}")
    print(f"r2         = {fit.r2:.8f}")
    print(f"s(A)       = {fit.s_A:.8f}")
    print(f"rel_gap    = {fit.rel_gap:.6f}")
    if args.out:
        write_decay_csv(args.out, [fit])
        print(f"csv: {args.out}")
    return EXIT_OK


def _cmd_check(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        params, grid = cfg.params, cfg.grid
        if args.p is not None or args.mu is not None or args.omega is not None \
                or args.n is not None:
            params = HypothesisParams(
                n=args.n if args.n is not None else params.n,
                p=args.p if args.p is not None else params.p,
                mu=args.mu if args.mu is not None else params.mu,
                omega=args.omega if args.omega is not None else params.omega,
                a=params.a)
            grid = Grid(params.n, grid.N)
    else:
        params = HypothesisParams(n=args.n if args.n is not None else 1,
                                  p=args.p if args.p is not None else 2.0,
                                  mu=args.mu if args.mu is not None else 1.0,
                                  omega=args.omega if args.omega is not None else 0.0)
        grid = Grid(params.n, args.N)
    report = check_hypotheses(params, grid)
    print(report.table())
    return EXIT_OK if report.small_data_ok else EXIT_HYPOTHESIS


def _cmd_convergence(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    rows = convergence_study(cfg, axis=args.axis, seed=args.seed)
    if args.axis == "h":
        print(f"{'h':>12s} {'error':>14s} {'order':>8s}")
        for r in rows:
            print(f"{r['h']:12.6g} {r['error']:14.6e} {r['order']:8.3f}")
    else:
        print(f"{'N':>6s} {'error':>14s} {'ratio':>8s}")
        for r in rows:
            print(f"{r['N']:6d} {r['error']:14.6e} {r['ratio']:8.2f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        key = args.axis
        other = "order" if args.axis == "h" else "ratio"
        lines = [f"{key},error,{other}"]
        for r in rows:
            lines.append(f"{r[key]!r},{r['error']!r},{r[other]!r}".replace("'", ""))
        (out / "convergence.csv").write_text("\n".join(lines) + "\n",
                                             encoding="utf-8")
        print(f"csv: {out / 'convergence.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_run(args, "simulate")
        if args.command == "picard":
            return _cmd_run(args, "picard")
        if args.command == "spectrum":
            return _cmd_spectrum(args)
        if args.command == "decay-fit":
            return _cmd_decay_fit(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        raise AssertionError(args.command)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except PlateflowError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
