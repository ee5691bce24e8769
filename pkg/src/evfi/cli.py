"""Command-line entry point.

Subcommands:

* ``simulate``    frames directory + timestamps -> EVT1 event file
* ``benchmark``   skip-N evaluation of a backend over a dataset
* ``ablation``    per-stage scores from a backend's intermediate outputs
* ``rope``        PSNR as a function of skip position
* ``interframe``  benchmark with real vs. empty inter-frame events
* ``stats``       contribution histogram from emitted attention maps
* ``make-dataset``deterministic synthetic dataset generation

Exit status is 0 only when every job scored.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, synth
from .events import write_binary
from .images import Frame, load_image
from .metrics import format_summary
from .simulator import SimulatorConfig, simulate

STATS_CANDIDATES = ("left_refined", "right_refined", "synthesis")


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", required=True, help="dataset root directory")
    parser.add_argument("--skip", type=int, default=1, help="frames skipped between keyframes")
    parser.add_argument("--backend", default="average", help="backend name or exec:<command>")
    parser.add_argument("--out", required=True, help="run output directory")
    parser.add_argument("--bins", type=int, default=5, help="voxel grid temporal bins")
    parser.add_argument("--jobs", type=int, default=1, help="parallel backend workers")
    parser.add_argument("--seed", type=int, default=0, help="run seed (recorded in reports)")
    parser.add_argument("--split", default=None, help="restrict to a dataset split")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evfi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate events from a frame directory")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--timestamps-file", required=True, help="one integer microsecond per line")
    p.add_argument("--out", required=True, help="output EVT1 path")
    p.add_argument("--c-pos", type=float, default=0.2)
    p.add_argument("--c-neg", type=float, default=0.2)
    p.add_argument("--jitter-std", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)

    for name in ("benchmark", "ablation", "rope", "interframe"):
        p = sub.add_parser(name)
        _add_run_args(p)

    p = sub.add_parser("stats", help="aggregate attention-map contribution fractions")
    p.add_argument("--out", required=True, help="finished run directory to scan")

    p = sub.add_parser("make-dataset", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=["benchmark", "toy"], default="benchmark")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_simulate(args) -> int:
    timestamps = [int(line) for line in Path(args.timestamps_file).read_text().split()]
    frame_paths = sorted(Path(args.frames_dir).glob("*.png"))
    if len(frame_paths) != len(timestamps):
        print(
            f"error: {len(frame_paths)} frames but {len(timestamps)} timestamps",
            file=sys.stderr,
        )
        return 2
    frames = [Frame(t, load_image(p)) for t, p in zip(timestamps, frame_paths)]
    config = SimulatorConfig(
        c_pos=args.c_pos, c_neg=args.c_neg, jitter_std=args.jitter_std, seed=args.seed
    )
    stream = simulate(frames, config)
    write_binary(stream, args.out)
    print(f"wrote {len(stream)} events to {args.out}")
    return 0


def _finish_run(report, failures, label) -> int:
    if report is not None:
        print(format_summary(report, label))
    for failure in failures:
        print(f"FAILED {failure}", file=sys.stderr)
    return 0 if report is not None and not failures else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "simulate":
        return _cmd_simulate(args)

    if args.command == "benchmark":
        report, failures, _ = bench.run_benchmark(
            args.dataset, args.skip, args.backend, args.out,
            bins=args.bins, jobs=args.jobs, split=args.split,
        )
        return _finish_run(report, failures, args.backend)

    if args.command == "ablation":
        stage_reports, failures = bench.run_ablation(
            args.dataset, args.skip, args.backend, args.out,
            bins=args.bins, jobs=args.jobs, split=args.split,
        )
        print((Path(args.out) / "ablation.txt").read_text(), end="")
        for failure in failures:
            print(f"FAILED {failure}", file=sys.stderr)
        return 0 if not failures else 1

    if args.command == "rope":
        report, failures = bench.run_rope(
            args.dataset, args.skip, args.backend, args.out,
            bins=args.bins, jobs=args.jobs, split=args.split,
        )
        print((Path(args.out) / "rope.csv").read_text(), end="")
        return _finish_run(report, failures, args.backend)

    if args.command == "interframe":
        (with_report, without_report), failures = bench.run_interframe_ablation(
            args.dataset, args.skip, args.backend, args.out,
            bins=args.bins, jobs=args.jobs, split=args.split,
        )
        print((Path(args.out) / "interframe.txt").read_text(), end="")
        for failure in failures:
            print(f"FAILED {failure}", file=sys.stderr)
        return 0 if not failures else 1

    if args.command == "stats":
        fractions = bench.attention_stats(args.out)
        if fractions is None:
            print("no attention maps found", file=sys.stderr)
            return 1
        print("candidate,fraction")
        for name, value in zip(STATS_CANDIDATES, fractions):
            print(f"{name},{value:.6f}")
        return 0

    if args.command == "make-dataset":
        if args.kind == "benchmark":
            synth.make_benchmark_dataset(args.out, seed=args.seed)
        else:
            synth.make_toy_training_dataset(args.out, seed=args.seed)
        print(f"dataset written to {args.out}")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
