"""Command-line entry point.

Subcommands: demos, pretrain, finetune, eval, verify (plus a plot utility).
Exit codes: 0 success, 2 configuration error, 3 checkpoint error, 4 numeric
abort (the diagnostic dump path is printed).
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import CheckpointError, ConfigurationError, ContractViolationError, NumericError
from .config import RunConfig
from .plots import emit_plot
from .verify import run_all_checks
from .workflows import run_demos, run_eval, run_finetune, run_pretrain

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reinflow",
                                     description="Flow policies: pretraining and online RL fine-tuning")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="path to a run config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    add_common(sub.add_parser("demos", help="generate expert demonstrations"))
    add_common(sub.add_parser("pretrain", help="behavior-clone a flow policy from demos"))

    p_ft = sub.add_parser("finetune", help="online RL fine-tuning from a pretrained checkpoint")
    add_common(p_ft)
    p_ft.add_argument("--resume", default=None, help="resume from a fine-tune checkpoint")

    p_eval = sub.add_parser("eval", help="deterministic evaluation of a checkpoint")
    add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=None)

    p_verify = sub.add_parser("verify", help="run the built-in oracle suite")
    p_verify.add_argument("--quick", action="store_true", help="reduced seeds/sample sizes")

    p_plot = sub.add_parser("plot", help="plot metric columns from a CSV")
    p_plot.add_argument("--metrics", required=True)
    p_plot.add_argument("--columns", required=True, help="comma-separated column names")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--baseline", type=float, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            results = run_all_checks(quick=args.quick)
            failed = [r for r in results if not r.passed]
            for r in results:
                status = "PASS" if r.passed else "FAIL"
                print(f"[{status}] {r.name}: {r.detail}")
            print(f"{len(results) - len(failed)}/{len(results)} checks passed")
            return EXIT_OK if not failed else 1

        if args.command == "plot":
            emit_plot(args.metrics, args.columns.split(","), args.out, baseline=args.baseline)
            print(f"wrote {args.out}")
            return EXIT_OK

        cfg = RunConfig.from_file(args.config)
        if args.command == "demos":
            path = run_demos(cfg, args.seed)
            print(f"wrote {path}")
        elif args.command == "pretrain":
            path = run_pretrain(cfg, args.seed)
            print(f"wrote {path}")
        elif args.command == "finetune":
            path = run_finetune(cfg, args.seed, resume=args.resume)
            print(f"wrote {path}")
        elif args.command == "eval":
            result = run_eval(cfg, args.checkpoint, args.seed, args.episodes)
            print(json.dumps(result, sort_keys=True))
        return EXIT_OK
    except (ConfigurationError, ContractViolationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
