"""evfi-neural command line: train the toy pipeline, serve job directories.

The ``infer`` subcommand follows the harness exec-backend convention: the
job directory arrives as the trailing positional argument, so the harness
invokes it as ``--backend exec:"evfi-neural infer --checkpoint ckpt.pt"``.
"""

from __future__ import annotations

import argparse
import sys

from .infer import process_job
from .train import TrainingConfig, load_pipeline, staged_train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evfi-neural")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="staged training on a dataset root")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.add_argument("--epochs-per-stage", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--skips", type=int, nargs="+", default=[1, 3])
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--base-width", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("infer", help="process one materialized job directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("job_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        config = TrainingConfig(
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            epochs_per_stage=args.epochs_per_stage,
            skips=tuple(args.skips),
            bins=args.bins,
            base_width=args.base_width,
            seed=args.seed,
        )
        result = staged_train(args.dataset, config, args.checkpoint)
        for stage, history in result.stage_losses.items():
            epochs = " ".join(f"{v:.4f}" for v in history["epochs"])
            print(f"{stage}: initial {history['initial']:.4f} epochs {epochs}")
        print(f"checkpoint written to {result.checkpoint}")
        return 0
    if args.command == "infer":
        pipeline, _ = load_pipeline(args.checkpoint)
        process_job(pipeline, args.job_dir)
        return 0
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
