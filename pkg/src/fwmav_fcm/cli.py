"""Command-line driver: ``fwmav-fcm {generate,identify,run,report,all}``.

Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure.
Failures print one line ``error: <kind>: <reason>`` on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import experiment
from .config import CONTROLLER_IDS, load_config
from .exceptions import ConfigError, DegenerateClusterError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fwmav-fcm",
        description="FCM identification and adaptive fuzzy altitude control of a flapping-wing MAV",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config (default: built-in)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, metavar="N", help="seed override for every stage")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="simulate the excitation dataset")
    p = sub.add_parser("identify", parents=[common], help="identify the TS model")
    p.add_argument("--dataset", metavar="PATH", help="dataset CSV (default: OUT/dataset.csv)")
    p = sub.add_parser("run", parents=[common], help="run one closed-loop experiment")
    p.add_argument("--model", metavar="PATH", help="model file (default: OUT/model.json)")
    p.add_argument("--controller", required=True, help=f"one of {', '.join(CONTROLLER_IDS)}")
    p.add_argument("--reference", required=True, help="reference id from the config")
    for name, text in (("report", "build the RMSE table"), ("all", "run the full pipeline")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--parallel", type=int, default=1, metavar="K", help="worker processes")
        if name == "report":
            p.add_argument("--model", metavar="PATH", help="model file (default: OUT/model.json)")
    return parser


def _resolve_config(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.out is not None:
        config = dataclasses.replace(config, out_dir=args.out)
    return config


def _dispatch(args):
    config = _resolve_config(args)
    if getattr(args, "parallel", 1) < 1:
        raise ConfigError("--parallel must be >= 1")
    if args.command == "generate":
        print(experiment.cmd_generate(config))
    elif args.command == "identify":
        path, rows = experiment.cmd_identify(config, args.dataset)
        print(path)
        for name, rmse, std, ratio in rows:
            print(f"{name} rmse={rmse:.6g} std={std:.6g} ratio={ratio:.4f}")
    elif args.command == "run":
        path, rmse = experiment.cmd_run(config, args.controller, args.reference, args.model)
        print(f"{args.controller} {args.reference} rmse={rmse:.6f} trace={path}")
    else:
        if args.command == "report":
            experiment.cmd_report(config, args.model, parallel=args.parallel)
        else:
            experiment.cmd_all(config, parallel=args.parallel)
        out = Path(config.out_dir)
        sys.stdout.write((out / "report.txt").read_text())
    return EXIT_OK


def _one_line(exc):
    return " ".join(str(exc).split())


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"error: config: {_one_line(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateClusterError as exc:
        print(
            f"error: numerical: {_one_line(exc)} (retry with another --seed or more restarts)",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"error: numerical: {_one_line(exc)}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: io: {_one_line(exc)}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
