"""Command line entry point: ``disfilter run`` and ``disfilter certify``."""

import argparse
import os
import sys

from ._linalg import NumericalError
from .experiment import (
    ConfigError,
    ExperimentConfig,
    certify,
    format_certificate,
    format_report,
    is_inconclusive,
    load_config,
    run_experiment,
    write_text,
)
from .filters import SCHEDULES
from .network import NetworkError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value experiment file")
    common.add_argument("--schedule", choices=SCHEDULES)
    common.add_argument("--steps", type=int)
    common.add_argument("--runs", type=int)
    common.add_argument("--seed", type=int, help="falls back to $DISFILTER_SEED, then 0")
    common.add_argument("--nodes", type=int)
    common.add_argument("--edges", type=int)
    common.add_argument("--topology-seed", type=int)
    common.add_argument("--topology-file")
    common.add_argument("--weights", choices=("uniform", "metropolis"))
    common.add_argument("--no-vertical-observer", dest="vertical_observer", action="store_false", default=None)
    common.add_argument("--freeze-gains-after", type=int)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--q", type=float)
    common.add_argument("--r", type=float)
    common.add_argument("--output", help="output path ('-' or omitted: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--reproducible", action="store_true", default=None, help="omit the timestamp header")

    parser = argparse.ArgumentParser(prog="disfilter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate and filter; emit error and eigenvalue records")
    sub.add_parser("certify", parents=[common], help="converge the distributed Riccati recursion and certify it")
    return parser


def _config_from_args(args):
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config") and v is not None
    }
    if "seed" not in overrides and os.environ.get("DISFILTER_SEED"):
        try:
            overrides["seed"] = int(os.environ["DISFILTER_SEED"])
        except ValueError:
            raise ConfigError("DISFILTER_SEED must be an integer") from None
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**overrides)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "run":
            report = run_experiment(config)
            write_text(format_report(report, config.format, config.reproducible), config.output)
            return EXIT_OK
        cert = certify(config)
        write_text(format_certificate(cert, config, config.reproducible), config.output)
        return EXIT_INCONCLUSIVE if is_inconclusive(cert) else EXIT_OK
    except (ConfigError, NetworkError, OSError, TypeError) as exc:
        print(f"disfilter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"disfilter: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"disfilter: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
