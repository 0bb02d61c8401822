"""Command-line entry point: ``socdw <subcommand> --config run.yaml --out results/``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import ConfigError, load
from .scans import run_eigen, run_gamma_scan, run_omega_scan, run_single

COMMANDS = {
    "eigen": (None, run_eigen, "eigenstructure, symmetry table, localized basis, resonance catalog"),
    "single": ("single-run", run_single, "one trajectory (optionally with four-state comparison)"),
    "spectrum": ("spectrum", run_single, "trajectory plus beat spectrum of P_L"),
    "scan-omega": ("omega-scan", run_omega_scan, "time averages against the drive frequency"),
    "scan-gamma": ("gamma-scan", run_gamma_scan, "time averages against the SOC strength"),
    "coupling": ("coupling-scan", run_gamma_scan, "energies, PT labels and couplings V against gamma"),
    "quasienergy": ("quasienergy-scan", run_gamma_scan, "folded Floquet quasienergies against gamma or omega"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="socdw", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, _, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel worker processes (default: all cores)")
        p.add_argument("--seedless", action="store_true",
                       help="accepted for compatibility; every computation is deterministic")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one configuration key")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind, runner, _ = COMMANDS[args.command]
    try:
        cfg = load(args.config, args.overrides)
        if kind is not None:
            cfg = cfg.with_kind(kind)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except (ConfigError, OSError) as exc:
        print(f"socdw: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        outcome = runner(cfg, args.out, args.workers)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"socdw: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    for path in outcome.files:
        print(path)
    print(outcome.manifest)
    return 1 if outcome.failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
