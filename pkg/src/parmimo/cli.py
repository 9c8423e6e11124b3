"""Command-line entry point: ``parmimo <command> [--config PATH] [options]``.

On failure a single JSON object ``{"error": ..., "message": ..., "field": ...}``
is written to stderr and the process exits nonzero (2 for bad input, 1 for
runtime failures).
"""

import argparse
import json
import os
import sys
import time

from parmimo import kernels
from parmimo.experiments import COMMANDS, ConfigError, ExperimentConfig, clean_json


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # report usage problems through the JSON error line instead of exiting
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="parmimo", description="PAR-aware massive MU-MIMO-OFDM precoding experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config (defaults are used for missing keys)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--out", help="output directory, overrides the config")
        p.add_argument("--threads", type=int, default=1, help="worker processes for frame-level parallelism")
        p.add_argument("--trace", action="store_true", help="write per-iteration solver traces")
    return parser


def _fail(kind, message, field=None, code=1):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "field": field}) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("UsageError", str(exc), code=2)

    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer", field="seed")
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        if args.threads < 1:
            raise ConfigError("threads must be >= 1", field="threads")
        cfg.validate()
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), exc.field, code=2)
    except OSError as exc:
        return _fail("ConfigError", f"cannot read config: {exc}", "config", code=2)

    try:
        os.makedirs(cfg.out, exist_ok=True)
        start = time.perf_counter()
        summary = COMMANDS[args.command](cfg, cfg.out, threads=args.threads, trace=args.trace)
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), exc.field, code=2)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one error line
        return _fail(type(exc).__name__, str(exc))
    report = {"command": args.command, "out": cfg.out, "backend": kernels.BACKEND,
              "seconds": round(time.perf_counter() - start, 3), "summary": summary}
    sys.stdout.write(json.dumps(clean_json(report), allow_nan=False) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
