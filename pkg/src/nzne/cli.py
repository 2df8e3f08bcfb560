"""Command line entry point: ``nzne run | report | validate-config``.

Exit codes: 0 success, 1 run errors, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .runner import WORKERS_ENV, ConfigError, build_circuit, load_config, report, run

EXIT_OK, EXIT_RUN, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nzne", description="Noisy tensor-network emulation with non-zero noise extrapolation.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="emulate the grid of a config and extrapolate", epilog=f"{WORKERS_ENV} sets the worker count.")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="override the output directory")
    r.add_argument("--no-report", action="store_true", help="skip printing the summary table")
    rep = sub.add_parser("report", help="print the summary table of a finished run")
    rep.add_argument("output_dir")
    v = sub.add_parser("validate-config", help="check a config without running it")
    v.add_argument("config", nargs="+")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "validate-config":
        status = EXIT_OK
        for path in args.config:
            try:
                cfg = load_config(path)
                circuit = build_circuit(cfg)
            except ConfigError as exc:
                print(f"error: {exc}", file=sys.stderr)
                status = EXIT_CONFIG
                continue
            print(
                f"{path}: ok ({cfg.benchmark}, {circuit.n_qubits} qubits, {circuit.count(2)} two-qubit gates, "
                f"{len(cfg.lams)} x {len(cfg.bond_dims)} grid, {len(circuit.observables)} observables)"
            )
        return status

    if args.command == "report":
        try:
            report(args.output_dir, sys.stdout)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUN
        return EXIT_OK

    try:
        cfg = load_config(args.config)
        if args.output:
            cfg.output = args.output
        status = run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.no_report:
        report(cfg.output_dir, sys.stdout)
    return status


if __name__ == "__main__":
    sys.exit(main())
