"""Command line entry point: ``interlimit <mode> --config <path> [options]``.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 failed self-check.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness
from .config import MODES, ConfigError, RunConfig, load_config
from .diffuse import SolverFailure
from .sharp import CollapseError
from .spectral import EigenError
from .stokes import StokesError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4

RUNNERS = {
    "profile": harness.run_profile,
    "stokes-check": harness.run_stokes_check,
    "simulate": harness.run_simulate,
    "spectral": harness.run_spectral,
    "sharp": harness.run_sharp,
    "converge": harness.run_converge,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="interlimit", description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="key = value configuration file (defaults apply without one)")
    ap.add_argument("--out", help="output directory (overrides the config key)")
    ap.add_argument("--threads", type=int, help="parallel members in converge mode")
    ap.add_argument("--seed", type=int, help="seed for randomized sample sets")
    ap.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to the CSV output")
    return ap


def configure(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg.mode = args.mode
    if args.out is not None:
        cfg.out = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = configure(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "config.echo"), "w") as fh:
        fh.write(cfg.echo())
    try:
        result = RUNNERS[cfg.mode](cfg, cfg.out)
    except harness.CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ValueError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, StokesError, EigenError, CollapseError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.gnuplot:
        harness.write_gnuplot(cfg.mode, cfg.out)
    if isinstance(result, dict):
        for k, v in result.items():
            print(f"{k} = {v}")
    print(f"{cfg.mode}: done, output in {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
