"""Command-line entry point: ``aisets <subcommand> --config FILE``."""

import argparse
import os
import sys

from .channel import ChannelBoundError
from .experiment import SUBCOMMANDS, ConfigError, parse_config, run, write_falsification, write_result

EXIT_OK, EXIT_USAGE, EXIT_FALSIFIED = 0, 2, 3


def build_parser():
    ap = argparse.ArgumentParser(
        prog="aisets",
        description="Aligned-image-set bounds and finite-precision CSIT experiments.")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (defaults used when omitted)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        p.add_argument("--threads", type=int,
                       help="worker threads (fallback: $AISETS_THREADS, else 1)")
    return ap


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    try:
        return max(1, int(os.environ.get("AISETS_THREADS", "1")))
    except ValueError:
        return 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = None
        if args.config is not None:
            with open(args.config) as fh:
                text = fh.read()
        cfg = parse_config(args.subcommand, text, args.seed)
        res = run(cfg, _threads(args.threads))
    except (ConfigError, ChannelBoundError, OSError) as exc:
        print(f"aisets: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if res.falsified:
        path = write_falsification(res, cfg, args.out)
        write_result(res, cfg, args.out)
        print(f"aisets: invariant falsified; instance written to {path}", file=sys.stderr)
        return EXIT_FALSIFIED
    paths = write_result(res, cfg, args.out)
    if res.message:
        print(res.message)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
