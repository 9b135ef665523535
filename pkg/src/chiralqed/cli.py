"""Command-line front end.

    chiralqed simulate CONFIG [--workers N] [--rtol X] [--nmax K] [--out PATH]
    chiralqed preset NAME [--out PATH]
    chiralqed validate CONFIG

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .sweeps.config import ConfigError, load_config
from .sweeps.csvio import OutputError, emit_csv, sidecar_path
from .sweeps.presets import PRESET_NAMES, preset_document
from .sweeps.runner import run_sweep

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chiralqed", description="Chiral cavity-QED sweeps to CSV.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per grid point")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the sweep described by a JSON config")
    sim.add_argument("config")
    sim.add_argument("--workers", type=_positive_int, help="worker processes (overrides config)")
    sim.add_argument("--rtol", type=_positive_float, help="integrator relative tolerance")
    sim.add_argument("--nmax", type=_positive_int, help="Fock truncation per mode")
    sim.add_argument("--out", help="CSV path (overrides config 'output')")

    pre = sub.add_parser("preset", help="write the JSON config of a figure preset")
    pre.add_argument("name", help="one of: " + ", ".join(PRESET_NAMES))
    pre.add_argument("--out", help="file to write (default: stdout)")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    return parser


def _load(path: str):
    try:
        return load_config(path)
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"{path}: {len(exc.errors)} problem(s)", file=sys.stderr)
        for err in exc.errors:
            print(f"  - {err}", file=sys.stderr)
    return None


def _apply_overrides(cfg, args):
    solver = cfg.solver
    base = cfg.base
    if args.rtol is not None:
        solver = dataclasses.replace(solver, rtol=args.rtol)
    if args.nmax is not None:
        solver = dataclasses.replace(solver, n_max=args.nmax)
        base = base.replace(n_max=args.nmax)
    return dataclasses.replace(
        cfg,
        solver=solver,
        base=base,
        workers=args.workers if args.workers is not None else cfg.workers,
        output=args.out if args.out is not None else cfg.output,
    )


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_INVALID
    cfg = _apply_overrides(cfg, args)
    if not cfg.output:
        print("error: no output path (set 'output' in the config or pass --out)", file=sys.stderr)
        return EXIT_INVALID
    try:
        results = emit_csv(run_sweep(cfg), cfg.output, cfg)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: sweep failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = sum(not r.ok for r in results)
    print(f"wrote {len(results)} rows to {cfg.output} ({failed} failed); metadata in {sidecar_path(cfg.output)}")
    return EXIT_OK


def cmd_preset(args) -> int:
    try:
        doc = preset_document(args.name)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_INVALID
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_INVALID
    axes = " x ".join(f"{ax.param}[{len(ax.values)}]" for ax in cfg.axes) or "single point"
    print(f"{args.config}: ok, mode {cfg.mode}, {len(cfg)} point(s) ({axes})")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"simulate": cmd_simulate, "preset": cmd_preset, "validate": cmd_validate}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
