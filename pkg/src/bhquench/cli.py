"""Command line entry point.

    bhquench [--config FILE] [--seed S] [--out DIR] [--threads K] COMMAND
    bhquench reproduce fig3 --out out/fig3

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigError, NumericalError
from .runner.config import FIGURES, load_config
from .runner.pipeline import run_experiment

log = logging.getLogger("bhquench")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
SUBCOMMANDS = ("spectrum", "quench", "entropy", "ensembles", "observables", "interfere")


def _common(default) -> argparse.ArgumentParser:
    # the subcommand copy uses SUPPRESS so it does not reset flags given before the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help="YAML experiment configuration")
    common.add_argument("--seed", type=int, default=default, help="seed for shot sampling")
    common.add_argument("--out", default=default, help="output directory")
    common.add_argument("--threads", type=int, default=default, help="worker threads for time points")
    common.add_argument("-v", "--verbose", action="store_true", default=default or False)
    return common


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bhquench", description=__doc__.splitlines()[0], parents=[_common(None)])
    after = _common(argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[after])
    rep = sub.add_parser("reproduce", parents=[after], help="write the data behind one figure")
    rep.add_argument("figure", choices=FIGURES)
    return p


def _error(kind: str, exc: Exception, code: int) -> int:
    record = {"error": kind, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigError):
        record["location"] = exc.location
    if isinstance(exc, NumericalError) and exc.residual is not None:
        record["residual"] = exc.residual
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    command = args.figure if args.command == "reproduce" else args.command
    try:
        cfg = load_config(args.config, {"seed": args.seed, "output": args.out, "threads": args.threads})
        if command == "interfere" and cfg.interference.seed is None:
            raise ConfigError("interference.seed", "a seed is mandatory when sampling shots (use --seed)")
        result = run_experiment(cfg, command, raw=getattr(cfg, "raw", {}))
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except (NumericalError, ArithmeticError, ValueError) as exc:
        # configs are validated up front, so a ValueError here comes from the
        # computation itself (e.g. a target energy no temperature can reach)
        return _error("numerical", exc, EXIT_NUMERIC)
    except OSError as exc:
        return _error("io", exc, EXIT_IO)
    log.info("wrote %d files in %.1fs", len(result["outputs"]), result["elapsed_s"])
    print(result["manifest"])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
