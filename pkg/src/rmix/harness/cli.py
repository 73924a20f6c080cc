"""Command line entry point.

    rmix train --config run.yaml [--seed N] [--out DIR]
    rmix eval --checkpoint DIR/checkpoint.npz --episodes 32
    rmix trace --checkpoint DIR/checkpoint.npz [--seed N] [--out trace.csv]
    rmix plot runs/*/metrics.jsonl --out curves.svg
    rmix probe-bias --config run.yaml [--samples 100000]

Config values may also come from ``RMIX_<FIELD>`` environment variables
(see ``rmix.harness.config_io``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..config import ConfigError
from .checkpoint import CheckpointError
from .config_io import parse_config
from .metrics import MetricsError
from .plots import emit_plots
from .run import (
    RunError, dump_alpha_trace, evaluate_checkpoint, probe_bias, run_training, trace_to_csv,
)


def build_parser():
    p = argparse.ArgumentParser(prog="rmix", description="Risk-sensitive multi-agent training")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", default="runs/latest")
    t.add_argument("--total-steps", type=int, dest="total_steps")

    e = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=32)
    e.add_argument("--seed", type=int, default=0)

    tr = sub.add_parser("trace", help="per-step alpha and reward for one greedy episode")
    tr.add_argument("--checkpoint", required=True)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out")

    pl = sub.add_parser("plot", help="learning curves from metrics files")
    pl.add_argument("metrics", nargs="+")
    pl.add_argument("--out", required=True)

    pb = sub.add_parser("probe-bias", help="Monte-Carlo estimate of the post-update bias")
    pb.add_argument("--config", required=True)
    pb.add_argument("--samples", type=int, default=100_000)
    pb.add_argument("--seed", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            cfg = parse_config(args.config, {"seed": args.seed, "total_steps": args.total_steps})
            summary = run_training(cfg, args.out)
            print(json.dumps({k: summary[k] for k in ("status", "t_env", "final_success_rate",
                                                       "final_mean_return")}, sort_keys=True))
        elif args.command == "eval":
            print(json.dumps(evaluate_checkpoint(args.checkpoint, args.episodes, args.seed),
                             sort_keys=True))
        elif args.command == "trace":
            text = trace_to_csv(*dump_alpha_trace(args.checkpoint, args.seed))
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
        elif args.command == "plot":
            print(emit_plots(args.metrics, args.out))
        elif args.command == "probe-bias":
            cfg = parse_config(args.config, {"seed": args.seed})
            print(json.dumps(probe_bias(cfg, args.samples), sort_keys=True))
    except (ConfigError, CheckpointError, MetricsError, RunError, FileNotFoundError) as exc:
        print(f"rmix {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
