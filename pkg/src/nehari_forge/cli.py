"""Command line entry point: ``nehari-forge <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, runner
from .config import PRESETS, load, preset
from .errors import ConfigError, NehariForgeError

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2

COMMANDS = ("eigs", "solve", "continuation", "symmetry", "reproduce")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nehari-forge", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name != "reproduce":
            src = sp.add_mutually_exclusive_group(required=True)
            src.add_argument("--config", type=Path, help="JSON run configuration")
            src.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--resolution", type=int, help="intervals per unit length (overrides the config)")
        sp.add_argument("--quiet", action="store_true", help="only report errors")
        if name == "symmetry":
            sp.add_argument("--field", help="field CSV to classify")
        if name == "reproduce":
            sp.add_argument("--only", nargs="+", choices=sorted(PRESETS), help="subset of presets")
    return ap


def _config(args) -> dict:
    return load(args.config) if args.config is not None else preset(args.preset)


def _error_report(out: Path | None, command: str, exc: Exception) -> None:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    if out is None:
        return
    try:
        runner.write_json(
            out / "manifest.json",
            {"tool": "nehari-forge", "version": __version__, "command": command, "status": "error",
             "error": {"class": type(exc).__name__, "message": str(exc)}},
        )
    except OSError:
        pass


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.resolution is not None and args.resolution < 2:
        _error_report(None, args.command, ConfigError("--resolution must be at least 2"))
        return EXIT_CONFIG
    try:
        if args.command == "reproduce":
            return runner.run_reproduce(args.out, args.resolution, args.only)
        cfg = _config(args)
        if args.command == "eigs":
            return runner.run_eigs(cfg, args.out, args.resolution)
        if args.command == "solve":
            return runner.run_solve(cfg, args.out, args.resolution)
        if args.command == "continuation":
            return runner.run_continuation(cfg, args.out, args.resolution)
        return runner.run_symmetry(cfg, args.out, args.field, args.resolution)
    except ConfigError as exc:
        _error_report(args.out, args.command, exc)
        return EXIT_CONFIG
    except NehariForgeError as exc:
        _error_report(args.out, args.command, exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
