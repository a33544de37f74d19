"""Command-line entry point.

    collapsesim run --experiment born --config born.json --seed 42 [--trials N]
                    [--workers W] [--out-dir DIR]
    collapsesim run --list
    collapsesim run --validate --config born.json
    collapsesim validate born.json

Exit status: 0 when every criterion passes, 2 when a criterion fails, 1 on
any configuration or runtime error.
"""

from __future__ import annotations

import argparse
import sys

from . import config as cfgmod
from .errors import CollapseSimError
from .experiments import run_experiment, write_outputs

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collapsesim", description="Seeded state-reduction experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--experiment", choices=cfgmod.EXPERIMENTS)
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--seed", type=int, help="master seed (overrides the config)")
    run.add_argument("--trials", type=int, help="trial count (overrides the config)")
    run.add_argument("--workers", type=int, help="worker processes (default 1)")
    run.add_argument("--out-dir", help="output directory (default: config out_dir or ./results)")
    run.add_argument("--list", action="store_true", help="print the experiment names and exit")
    run.add_argument("--validate", action="store_true", help="check the config against its schema and exit")
    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("path")
    val.add_argument("--experiment", choices=cfgmod.EXPERIMENTS)
    return parser


def _experiment_name(explicit: str | None, data: dict) -> str:
    name = explicit or data.get("experiment")
    if not name:
        raise CollapseSimError("no experiment given: pass --experiment or set 'experiment' in the config")
    return name


def validate(path: str, experiment: str | None = None) -> tuple[bool, list[str]]:
    """Schema and cross-field report for a config file; nothing is simulated."""
    data = cfgmod.load(path)
    name = _experiment_name(experiment, data)
    errors = cfgmod.schema_errors(name, data)
    if not errors:
        errors = cfgmod.semantic_errors(name, cfgmod.deep_merge(cfgmod.DEFAULTS[name], data))
    return not errors, errors


def _print_validation(ok: bool, errors: list[str]) -> int:
    if ok:
        print("ok")
        return EXIT_OK
    for e in errors:
        print(f"violation: {e}", file=sys.stderr)
    return EXIT_ERROR


def run(args: argparse.Namespace) -> int:
    if args.list:
        for name in cfgmod.EXPERIMENTS:
            print(name)
        return EXIT_OK
    data = cfgmod.load(args.config) if args.config else {}
    if args.validate:
        if not args.config:
            raise CollapseSimError("--validate needs --config")
        return _print_validation(*validate(args.config, args.experiment))
    name = _experiment_name(args.experiment, data)
    result = run_experiment(name, data, seed=args.seed, trials=args.trials, workers=args.workers)
    out_dir = args.out_dir or result.config.get("out_dir") or "results"
    json_path, csv_path = write_outputs(result, out_dir)
    for c in result.criteria:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']!r} (target {c['target']})")
    print(f"wrote {json_path} and {csv_path}")
    return EXIT_OK if result.passed else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _print_validation(*validate(args.path, args.experiment))
        return run(args)
    except (CollapseSimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
