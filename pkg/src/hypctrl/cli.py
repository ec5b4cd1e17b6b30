"""Command line interface.

Subcommands:
    run <config>              execute a scenario configuration
    validate <config>         model/data validation report only
    reproduce-paper [--out]   run the three bundled benchmark presets

Exit codes: 0 success, 1 validation or reproduction failure, 2 configuration
error, 3 plant blow-up detected (artifacts still written), 4 internal
numerical failure.  The output directory can be overridden with --out or the
HYPCTRL_OUTDIR environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config_file
from .errors import (
    ConfigError,
    ControlError,
    HypctrlError,
    NumericsError,
    ObserverError,
    PredictionError,
)
from .model import Scenario as ValScenario
from .model import validate_model
from .reproduce import format_report, reproduce_paper
from .scenario import run_scenario

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_NUMERICS = 4


def _out_dir(args) -> str | None:
    if getattr(args, "out", None):
        return args.out
    return os.environ.get("HYPCTRL_OUTDIR") or None


def _apply_overrides(cfg, args):
    if args.grid_n is not None:
        from .errors import ConfigError as CE
        from .model import Grid

        if cfg.raw.get("model.preset") in ("paper-sec5", "paper-sec5-semilinear") \
                and args.grid_n % 2 != 0:
            raise CE("grid.N override must be even for this preset",
                     key="grid.N")
        cfg.grid = Grid.uniform(args.grid_n)
    if args.t_end is not None:
        cfg.t_end = args.t_end
    if args.no_plots:
        cfg.plots = False
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = load_config_file(args.config)
        cfg = _apply_overrides(cfg, args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_scenario(cfg, out_dir=_out_dir(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, ControlError, PredictionError, ObserverError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    print(result.summary)
    return result.exit_code


def cmd_validate(args) -> int:
    try:
        cfg = load_config_file(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    scenario = (
        ValScenario.TRACKING
        if cfg.objective == "tracking"
        else ValScenario.STABILIZATION
    )
    report = validate_model(cfg.model, cfg.init, cfg.grid, scenario)
    print(report)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_reproduce(args) -> int:
    out = _out_dir(args) or "reproduction"
    try:
        reports = reproduce_paper(out_dir=out, plots=not args.no_plots)
    except HypctrlError as exc:
        print(f"reproduction failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    print(format_report(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hypctrl",
        description=(
            "Simulation, predictive boundary control and observers for "
            "2x2 hyperbolic transport systems coupled to a boundary ODE."
        ),
    )
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario configuration")
    run_p.add_argument("config", help="path to a scenario config file")
    run_p.add_argument("--out", help="output directory override")
    run_p.add_argument("--grid-n", type=int, default=None,
                       help="override grid.N")
    run_p.add_argument("--t-end", type=float, default=None,
                       help="override sim.t_end")
    run_p.add_argument("--no-plots", action="store_true",
                       help="skip SVG rendering")
    run_p.set_defaults(fn=cmd_run)

    val_p = sub.add_parser("validate", help="validate a configured model")
    val_p.add_argument("config")
    val_p.set_defaults(fn=cmd_validate)

    rep_p = sub.add_parser(
        "reproduce-paper", help="run the bundled benchmark presets"
    )
    rep_p.add_argument("--out", help="output directory (default: reproduction)")
    rep_p.add_argument("--no-plots", action="store_true")
    rep_p.set_defaults(fn=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
