"""Command line entry point: ``gpl <experiment> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import sys

from .experiments import EXIT_OK, ConfigError, ExperimentConfig, run

COMMANDS = {
    "forward-check": "forward_check",
    "uniqueness-probe": "uniqueness_probe",
    "reconstruct": "reconstruct",
    "density-report": "density_report",
}

EXIT_USAGE = 1


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as a validation failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gpl", description="Gabor phase retrieval on lattices: experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="experiment config (JSON)")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--trials", type=int, default=None, help="override the trial count")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config).with_overrides(args.seed, args.trials)
    except (ConfigError, OSError) as e:
        print(f"gpl: {e}", file=sys.stderr)
        return EXIT_USAGE
    want = COMMANDS[args.command]
    if cfg.experiment != want:
        print(f"gpl: config is for {cfg.experiment!r}, not {want!r}", file=sys.stderr)
        return EXIT_USAGE
    result = run(cfg, args.out)
    flags = result.summary.get("flags") or []
    for f in flags:
        print(f"gpl: WARNING {f}", file=sys.stderr)
    status = "ok" if result.exit_code == EXIT_OK else f"exit {result.exit_code}"
    print(f"{args.command}: {status}; wrote {len(result.files)} files to {args.out}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
