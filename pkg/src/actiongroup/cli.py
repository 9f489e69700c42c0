"""Command line: ``actiongroup <group|change|cluster|synth|oracle-check>``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
degeneracy.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import MODES, load_config
from .errors import ActionGroupError, ConfigurationError
from .pipeline import RUNNERS

_HELP = {
    "group": "group simultaneous persons by action, per interval",
    "change": "flag persons who changed action between consecutive intervals",
    "cluster": "cluster all (person, interval) entities in space and time",
    "synth": "generate a synthetic scenario as tensor files",
    "oracle-check": "compare the coding solver with the exhaustive oracle",
}


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actiongroup",
        description="Unsupervised grouping of human actions with per-person dictionaries.",
    )
    sub = parser.add_subparsers(dest="mode", required=True, metavar="command")
    for mode in MODES:
        p = sub.add_parser(mode, help=_HELP[mode], description=_HELP[mode])
        p.add_argument("--config", help="JSON config file (defaults are used when omitted)")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=_u64, help="master seed; overrides the config")
        p.add_argument("--threads", type=_positive, help="worker threads; overrides the config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, mode=args.mode, seed=args.seed, threads=args.threads)
        summary = RUNNERS[args.mode](cfg, args.out)
    except ActionGroupError as exc:
        print(f"actiongroup {args.mode}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"actiongroup {args.mode}: {exc}", file=sys.stderr)
        return 3
    brief = {k: v for k, v in summary.items() if not isinstance(v, (list, dict)) or k == "C"}
    print(json.dumps({"out": str(args.out), **brief}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
