"""Command line entry point: ``omdlab run | preset | list-presets``."""

import argparse
import sys

from .bench import config, presets
from .bench.runner import EXIT_CONFIG, run_scenario
from .exceptions import ConfigError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="omdlab", description="Exact and inexact online mirror descent experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config (INI)")
    run.add_argument("config")
    run.add_argument("--out", default=".", help="output directory (default: current)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for seeds")

    pre = sub.add_parser("preset", help="run a named preset")
    pre.add_argument("name")
    pre.add_argument("--out", default=".", help="output directory (default: current)")
    pre.add_argument("--jobs", type=int, default=1, help="worker processes for seeds")
    pre.add_argument("--dump", action="store_true", help="print the preset as INI instead of running it")

    sub.add_parser("list-presets", help="list preset names")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-presets":
        for name in presets.PRESETS:
            print(f"{name:15s} {presets.DESCRIPTIONS[name]}")
        return 0
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "preset":
        try:
            scn = presets.preset(args.name)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.dump:
            sys.stdout.write(config.serialize(scn))
            return 0
        return run_scenario(scn, args.out, args.jobs).code
    return run_scenario(args.config, args.out, args.jobs).code


if __name__ == "__main__":
    sys.exit(main())
