"""Command-line entry point: one subcommand per pipeline stage."""
from __future__ import annotations

import argparse
import logging
import sys

from .classify import TrainError
from .cluster import ClusterError
from .corpus import CorpusError
from .embed import EmbedError
from .metrics import MetricError
from .pipeline import STAGES, DataError, PipelineConfig, run_pipeline
from .propagate import PropagationError
from .triples import ConlluError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

DATA_ERRORS = (DataError, CorpusError, ConlluError, EmbedError, ClusterError, MetricError, TrainError, PropagationError, FileNotFoundError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="triplex", description="Triple-augmented clustering/classification pipeline")
    parser.add_argument("--log-level", default="INFO", help="logging level (DEBUG/INFO/WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "pipeline"):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "pipeline" else "run every stage in order")
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="global seed (default 42, overrides config)")
        p.add_argument("--mode", default=None, help="restrict to one representation mode (unused by most stages)")
        p.add_argument("--provider", default=None, help="override provider kind (hash|remote)")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--threads", type=int, default=None, help="worker cap")
        if name in ("cluster", "pipeline"):
            p.add_argument("--k-min", type=int, default=None, help="smallest k in the partition sweep")
            p.add_argument("--k-max", type=int, default=None, help="largest k in the partition sweep")
    return parser


def _configure(args) -> PipelineConfig:
    cfg = PipelineConfig.from_toml(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.provider is not None:
        cfg.provider_kind = args.provider
    if args.out is not None:
        cfg.outdir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if getattr(args, "k_min", None) is not None:
        cfg.k_min = args.k_min
    if getattr(args, "k_max", None) is not None:
        cfg.k_max = args.k_max
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO))
    try:
        cfg = _configure(args)
        if args.command == "pipeline":
            run_pipeline(cfg)
        else:
            STAGES[args.command](cfg)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001
        logging.getLogger(__name__).exception("internal error")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
