"""Command line entry point: ``chanalloc {train,eval,baseline,compare}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import harness
from .harness import ExperimentConfig


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "method", None) is not None:
        overrides["method"] = args.method
    if getattr(args, "episodes", None) is not None:
        overrides["eval_episodes"] = args.episodes
    if getattr(args, "horizon", None) is not None:
        overrides["eval_horizon"] = args.horizon
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chanalloc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, method_choices):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=True, help="artifact directory")
        if method_choices:
            sp.add_argument("--method", choices=method_choices)
        sp.add_argument("--trace", action="store_true", help="also write trace.jsonl")

    t = sub.add_parser("train", help="train a DDQN agent and evaluate it")
    common(t, harness.LEARNING_METHODS)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    common(e, None)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int)
    e.add_argument("--horizon", type=int)

    b = sub.add_parser("baseline", help="run the SAP-only or random baseline")
    common(b, harness.BASELINE_METHODS)
    b.add_argument("--episodes", type=int)
    b.add_argument("--horizon", type=int)

    c = sub.add_parser("compare", help="summarise several artifact directories")
    c.add_argument("runs", nargs="+")
    c.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            harness.run_train(_config(args), args.out, trace=args.trace)
        elif args.command == "eval":
            harness.run_eval(args.checkpoint, _config(args), args.out, trace=args.trace)
        elif args.command == "baseline":
            cfg = _config(args)
            if args.method is None and cfg.method not in harness.BASELINE_METHODS:
                raise harness.HarnessError("baseline needs --method sap_only|random")
            harness.run_baseline(cfg, args.out, trace=args.trace)
        else:
            _, _, table = harness.compare(args.runs, args.out)
            print(table)
    except Exception as exc:  # one machine-parsable line, nonzero exit
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
