"""Command line entry point.

    brpi run config.json [--output-dir DIR] [--seed S]
    brpi plot RUN_DIR --kind {convergence,heatmap,league,bars} [--figure]
    brpi metagame RUN_DIR [--tau T ...]
    brpi exploit RUN_DIR --checkpoint T [--B 2 --C 16 --episodes 1000]

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
BRPI_WORKERS sets how many independent runs execute in parallel.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (PLOT_KINDS, ConfigError, ExperimentConfig, MissingStage,
                         emit_plot_data, exploit_checkpoint, run_experiment, run_metagame)
from .metrics import QreNotConverged
from .responses import SBRConfig

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brpi", description="Game dynamics experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", type=Path)
    r.add_argument("--output-dir", default=None, help="override output_dir")
    r.add_argument("--seed", type=int, default=None, help="override the master seed")

    pl = sub.add_parser("plot", help="emit plot-ready CSV for a run directory")
    pl.add_argument("run_dir", type=Path)
    pl.add_argument("--kind", choices=PLOT_KINDS, required=True)
    pl.add_argument("--figure", action="store_true", help="also render PNG with matplotlib")

    m = sub.add_parser("metagame", help="one-vs-rest table and Nash leagues")
    m.add_argument("run_dir", type=Path)
    m.add_argument("--tau", type=float, nargs="+", default=None)

    e = sub.add_parser("exploit", help="SBR lower bound on a checkpoint's exploitability")
    e.add_argument("run_dir", type=Path)
    e.add_argument("--checkpoint", type=int, required=True, help="iteration index")
    e.add_argument("--run", default=None, help="run name (default: first run)")
    e.add_argument("--B", type=int, default=2)
    e.add_argument("--C", type=int, default=16)
    e.add_argument("--episodes", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    return p


def _cmd_run(args):
    cfg = ExperimentConfig.load(args.config)
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=args.output_dir)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    print(run_experiment(cfg))


def _cmd_plot(args):
    for path in emit_plot_data(args.run_dir, args.kind):
        print(path)
        if args.figure:
            from .plotting import render
            print(render(path, args.kind))


def _cmd_metagame(args):
    if args.tau is not None and any(t <= 0 for t in args.tau):
        raise ConfigError("tau: Nash league temperatures must be positive")
    print(run_metagame(args.run_dir, taus=args.tau))


def _cmd_exploit(args):
    result = exploit_checkpoint(args.run_dir, args.checkpoint, SBRConfig(B=args.B, C=args.C),
                                args.episodes, seed=args.seed, run=args.run)
    print(json.dumps({"checkpoint": args.checkpoint, **result.to_json()}))


COMMANDS = {"run": _cmd_run, "plot": _cmd_plot, "metagame": _cmd_metagame, "exploit": _cmd_exploit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (MissingStage, QreNotConverged, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
