"""Command-line entry point: ``ckdpipe <command> [--config F] [--seed S] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .errors import CkdError, ConfigError, StageError
from .pipeline import STAGES, run_pipeline, run_stages, run_sweep

EXIT_STAGE_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def build_parser():
    parser = argparse.ArgumentParser(prog="ckdpipe", description="Chronic kidney disease classification pipeline.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (default: the shipped config)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--out", help="output directory, overrides the config")
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage from artifacts on disk")
    run_all = sub.add_parser("run-all", parents=[common], help="run every stage in order")
    run_all.add_argument("--stage", choices=STAGES, default="prep", help="resume from this stage")
    run_all.add_argument("--seeds", type=int, default=1, help="sweep N consecutive master seeds")
    return parser


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = cfg.with_out_dir(args.out)
    return cfg


def _print_summary(result):
    if isinstance(result, dict) and "aggregate" in result:
        print(json.dumps(result["aggregate"], indent=2, sort_keys=True))
    elif isinstance(result, dict) and "models" in result:
        for name, info in sorted(result["models"].items()):
            test = info.get("test") or {}
            print(f"{name:8s} acc={test.get('accuracy')} auc={test.get('auc')} kappa={test.get('kappa')}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "run-all":
            if args.seeds < 1:
                raise ConfigError("--seeds must be at least 1")
            if args.seeds > 1:
                result = run_sweep(cfg, args.seeds)
            else:
                result = run_pipeline(cfg, start=args.stage)
        else:
            result = run_stages(cfg, [args.command])
    except ConfigError as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    except CkdError as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    _print_summary(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
