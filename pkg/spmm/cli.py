"""Command-line entry point.

    python -m spmm run configs/breather.yaml [--set initial.xi=0.38]
    python -m spmm convergence configs/hump.yaml --levels 3 [--jobs 3]
    python -m spmm invariants runs/proposed_avg_breather_511_dt0.01

Exit codes: 0 ok, 1 other error, 2 solver failure, 3 conservation gate
failure, 4 configuration or input error.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .artifacts import write_table
from .config import load_config, output_root, run_name
from .errors import (
    AmbiguousBranch,
    CoincidentPoints,
    ConfigError,
    EllipticDomainError,
    GateFailure,
    NewtonDivergence,
    NonClosingCurve,
    NonZeroMean,
    SingularJacobian,
    SpmmError,
    ZeroWindow,
)
from .pipeline import check_gates, convergence, invariants_report, run

log = logging.getLogger("spmm")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SOLVER = 2
EXIT_GATE = 3
EXIT_CONFIG = 4

EXIT_CODES = {
    NewtonDivergence: EXIT_SOLVER,
    SingularJacobian: EXIT_SOLVER,
    ZeroWindow: EXIT_SOLVER,
    GateFailure: EXIT_GATE,
    ConfigError: EXIT_CONFIG,
    EllipticDomainError: EXIT_CONFIG,
    CoincidentPoints: EXIT_CONFIG,
    AmbiguousBranch: EXIT_CONFIG,
    NonClosingCurve: EXIT_CONFIG,
    NonZeroMean: EXIT_CONFIG,
}

CONVERGENCE_COLUMNS = (
    "K", "delta_t", "theta_error", "theta_order", "physical_error", "physical_order", "naive_gap",
)


def exit_code_for(exc):
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return EXIT_ERROR


def setup_logging(verbose=False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(name)s] %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "pass" if value else "FAIL"
    if isinstance(value, int):
        return str(value)
    return f"{value:.3e}"


def cmd_run(args):
    cfg = load_config(args.config, args.set)
    log.info("Running %s on %s (%d steps)", cfg.method, cfg.initial.kind, cfg.steps)
    out_dir = run(cfg, out_root=args.out, progress=args.progress)
    print(f"Run written to {out_dir}")
    summary = invariants_report(out_dir)
    _print_summary(summary)
    return EXIT_OK


def cmd_convergence(args):
    cfg = load_config(args.config, args.set)
    rows = convergence(cfg, args.levels, jobs=args.jobs)
    print("  ".join(f"{c:>14}" for c in CONVERGENCE_COLUMNS))
    for row in rows:
        print("  ".join(f"{_fmt(row[c]):>14}" for c in CONVERGENCE_COLUMNS))
    out_dir = Path(args.out or output_root()) / f"{run_name(cfg)}_convergence"
    out_dir.mkdir(parents=True, exist_ok=True)
    write_table(out_dir / "convergence.csv", rows, CONVERGENCE_COLUMNS)
    print(f"Table written to {out_dir / 'convergence.csv'}")
    return EXIT_OK


def cmd_invariants(args):
    summary = invariants_report(args.run_dir)
    _print_summary(summary)
    check_gates(summary)
    return EXIT_OK


def _print_summary(summary):
    print(f"method: {summary['method']}  levels: {summary['levels']}")
    for key in (
        "H_d_drift", "norm_I_drift", "energy_E_drift", "constraint_max", "constraint_ratio",
        "window_defect", "naive_gap_max", "roughness_growth",
    ):
        if key in summary:
            print(f"  {key:<18} {_fmt(summary[key])}")
    for name, ok in summary["gates"].items():
        print(f"  gate {name:<13} {_fmt(ok)}")


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog="spmm",
        description="Self-adaptive moving mesh solvers for the short pulse equation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log Newton iterations per step")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("config", help="Path to a YAML run configuration")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="Override a config value (repeatable)",
        )
        p.add_argument("--out", default=None, help="Output root (default: $SPMM_OUT or ./runs)")

    p_run = sub.add_parser("run", help="Simulate one configuration and write its run directory")
    add_config_args(p_run)
    p_run.add_argument("--progress", action="store_true", help="Show a progress bar")
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("convergence", help="Refinement study against the exact solution")
    add_config_args(p_conv)
    p_conv.add_argument("--levels", type=int, default=3, help="Number of refinement levels (default: 3)")
    p_conv.add_argument("--jobs", type=int, default=1, help="Levels run in parallel processes (default: 1)")
    p_conv.set_defaults(func=cmd_convergence)

    p_inv = sub.add_parser("invariants", help="Summarize invariant drift of a run directory")
    p_inv.add_argument("run_dir", help="Run directory containing invariants.csv and meta.txt")
    p_inv.set_defaults(func=cmd_invariants)

    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    setup_logging(args.verbose)
    try:
        code = args.func(args)
    except SpmmError as exc:
        log.error("%s", exc)
        history = getattr(exc, "history", None)
        if history:
            log.error("residual history: %s", ", ".join(f"{r:.3e}" for r in history))
        code = exit_code_for(exc)
    sys.exit(code)


if __name__ == "__main__":
    main()
