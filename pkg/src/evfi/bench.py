"""Benchmark harness: job materialization, backend protocol and runners.

Backends talk to the harness through a directory protocol, so learned
backends in other processes (or languages) plug in without build coupling.
For every job the harness materializes::

    jobs/job_<id>/
        job.txt                    key=value manifest (ids, sizes, taus)
        keyframe_left.png          I_left
        keyframe_right.png         I_right
        flow_left_to_right.flo     optional: forward flow over the interval
        targets/t<k>/
            events_left.evt1       keyframe_left -> target window
            events_right.evt1      target -> keyframe_right window
            events_reversed.evt1   target -> keyframe_left (time-reversed)
            voxel_left.vox1        voxel grids of the three windows above
            voxel_right.vox1
            voxel_reversed.vox1

The backend writes, per target, ``out/t<k>/prediction.png`` plus optional
intermediates (``stage_warp.png``, ``stage_synthesis.png``,
``stage_refined.png``, ``attention.vox1``) and finally an empty ``job.done``
sentinel. Ground-truth frames live outside the job directory and are never
exposed to backends. Reports merge in job-id order, so runs are deterministic
for a fixed dataset, backend and seed.
"""

from __future__ import annotations

import dataclasses
import shlex
import shutil
import subprocess
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from .blend import contribution_stats
from .dataset import (
    InterpolationJob,
    discover_sequences,
    load_sequence_events,
    make_skip_benchmark,
)
from .events import EventStream, write_binary
from .images import load_image, save_image
from .metrics import (
    MetricRecord,
    MetricReport,
    aggregate,
    format_summary,
    psnr,
    ssim,
    write_report_csv,
)
from .voxel import DEFAULT_BINS, VoxelGrid, build_voxel_grid, read_voxel, write_voxel
from .warp import backward_warp, read_flo, scale_flow, write_flo

JOB_DONE = "job.done"
STAGES = ("warp", "synthesis", "refined", "attention")


class BenchmarkError(RuntimeError):
    """The run produced no scored jobs."""


# ---------------------------------------------------------------------------
# key=value manifests
# ---------------------------------------------------------------------------

def write_kv(path, mapping) -> None:
    with open(path, "w") as f:
        for key, value in mapping.items():
            f.write(f"{key}={value}\n")


def read_kv(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# Materialization
# ---------------------------------------------------------------------------

def materialize_job(
    job: InterpolationJob, job_dir: Path, gt_dir: Path, bins: int, events_mode: str = "real"
) -> None:
    """Write one job's interchange directory and its hidden ground truth.

    ``events_mode='empty'`` replaces every event window with an empty stream
    (and hence all-zero voxel grids) while keeping the windows themselves:
    this is the no-inter-frame-information condition of the event ablation.
    """
    if events_mode not in ("real", "empty"):
        raise ValueError(f"events_mode must be 'real' or 'empty', not {events_mode!r}")
    job_dir.mkdir(parents=True, exist_ok=True)
    gt_dir.mkdir(parents=True, exist_ok=True)

    shutil.copyfile(job.left_frame, job_dir / "keyframe_left.png")
    shutil.copyfile(job.right_frame, job_dir / "keyframe_right.png")

    manifest = {
        "job_id": job.job_id,
        "sequence": job.sequence,
        "width": _frame_width(job),
        "height": _frame_height(job),
        "bins": bins,
        "t_left": job.t_left,
        "t_right": job.t_right,
        "n_targets": len(job.targets),
    }
    for k, target in enumerate(job.targets):
        manifest[f"target_{k}_t"] = target.t
        manifest[f"target_{k}_tau"] = repr(target.tau)

    if job.flow_file is not None:
        unit_flow = read_flo(job.flow_file)
        total = scale_flow(unit_flow, job.right_index - job.left_index)
        write_flo(total, job_dir / "flow_left_to_right.flo")
        manifest["flow"] = "flow_left_to_right.flo"

    write_kv(job_dir / "job.txt", manifest)

    for k, target in enumerate(job.targets):
        tdir = job_dir / "targets" / f"t{k}"
        tdir.mkdir(parents=True, exist_ok=True)
        windows = {
            "left": target.events_left,
            "right": target.events_right,
            "reversed": target.events_reversed,
        }
        for label, stream in windows.items():
            if events_mode == "empty":
                stream = EventStream.empty(stream.window, stream.sensor_width, stream.sensor_height)
            write_binary(stream, tdir / f"events_{label}.evt1")
            write_voxel(build_voxel_grid(stream, bins), tdir / f"voxel_{label}.vox1")
        shutil.copyfile(target.gt_frame, gt_dir / f"t{k}.png")


def _frame_width(job: InterpolationJob) -> int:
    return job.targets[0].events_left.sensor_width


def _frame_height(job: InterpolationJob) -> int:
    return job.targets[0].events_left.sensor_height


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

def finish_job(job_dir: Path) -> None:
    (Path(job_dir) / JOB_DONE).touch()


def _target_out_dir(job_dir: Path, k: int) -> Path:
    out = Path(job_dir) / "out" / f"t{k}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def backend_copy_left(job_dir: Path) -> None:
    """Predict the left keyframe for every target."""
    manifest = read_kv(Path(job_dir) / "job.txt")
    for k in range(int(manifest["n_targets"])):
        shutil.copyfile(Path(job_dir) / "keyframe_left.png", _target_out_dir(job_dir, k) / "prediction.png")
    finish_job(job_dir)


def backend_copy_right(job_dir: Path) -> None:
    """Predict the right keyframe for every target."""
    manifest = read_kv(Path(job_dir) / "job.txt")
    for k in range(int(manifest["n_targets"])):
        shutil.copyfile(Path(job_dir) / "keyframe_right.png", _target_out_dir(job_dir, k) / "prediction.png")
    finish_job(job_dir)


def backend_average(job_dir: Path) -> None:
    """Predict the pixel mean of the two keyframes."""
    job_dir = Path(job_dir)
    manifest = read_kv(job_dir / "job.txt")
    left = load_image(job_dir / "keyframe_left.png").astype(np.float64)
    right = load_image(job_dir / "keyframe_right.png").astype(np.float64)
    mean = (left + right) / 2.0
    for k in range(int(manifest["n_targets"])):
        save_image(mean, _target_out_dir(job_dir, k) / "prediction.png")
    finish_job(job_dir)


def backend_linear_flow(job_dir: Path) -> None:
    """Linear-motion baseline: warp the left keyframe with -tau times the
    supplied forward flow. Requires the job to carry a flow file."""
    job_dir = Path(job_dir)
    manifest = read_kv(job_dir / "job.txt")
    if "flow" not in manifest:
        raise FileNotFoundError("linear-flow backend needs a flow file in the job")
    flow_total = read_flo(job_dir / manifest["flow"])
    left = load_image(job_dir / "keyframe_left.png").astype(np.float64)
    for k in range(int(manifest["n_targets"])):
        tau = float(manifest[f"target_{k}_tau"])
        result = backward_warp(left, scale_flow(flow_total, -tau))
        save_image(result.image, _target_out_dir(job_dir, k) / "prediction.png")
    finish_job(job_dir)


BUILTIN_BACKENDS: dict[str, Callable[[Path], None]] = {
    "copy-left": backend_copy_left,
    "copy-right": backend_copy_right,
    "average": backend_average,
    "linear-flow": backend_linear_flow,
}


def register_backend(name: str, fn: Callable[[Path], None]) -> None:
    BUILTIN_BACKENDS[name] = fn


def resolve_backend(name: str) -> Callable[[Path], None]:
    """A backend is either a registered callable or ``exec:<command>``, run
    once per job with the job directory appended to the command line."""
    if name.startswith("exec:"):
        argv = shlex.split(name[len("exec:") :])

        def run_external(job_dir: Path) -> None:
            subprocess.run([*argv, str(job_dir)], check=True)

        return run_external
    try:
        return BUILTIN_BACKENDS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_BACKENDS))
        raise ValueError(f"unknown backend {name!r} (builtin: {known})") from None


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def plan_jobs(dataset_root, skip: int, split: str | None = None) -> list[InterpolationJob]:
    """Jobs for every sequence under a dataset root, ids global and ordered."""
    manifests = discover_sequences(dataset_root, split)
    if not manifests:
        raise BenchmarkError(f"no sequences found under {dataset_root}")
    jobs = []
    for manifest in manifests:
        events = load_sequence_events(manifest)
        for job in make_skip_benchmark(manifest, skip, events):
            jobs.append(dataclasses.replace(job, job_id=len(jobs)))
    return jobs


def run_benchmark(
    dataset_root,
    skip: int,
    backend: str,
    out_dir,
    *,
    bins: int = DEFAULT_BINS,
    jobs: int = 1,
    split: str | None = None,
    events_mode: str = "real",
    score_stages: bool = False,
):
    """Materialize jobs, run the backend and score predictions.

    Returns (report, failures, stage_reports); ``report`` is None when no job
    scored. A job fails as a unit when the backend errors or any prediction
    is missing or misshaped; remaining jobs still run.
    """
    out_dir = Path(out_dir)
    plans = plan_jobs(dataset_root, skip, split)
    backend_fn = resolve_backend(backend)

    job_dirs = []
    for job in plans:
        job_dir = out_dir / "jobs" / f"job_{job.job_id:06d}"
        gt_dir = out_dir / "gt" / f"job_{job.job_id:06d}"
        materialize_job(job, job_dir, gt_dir, bins, events_mode)
        job_dirs.append((job, job_dir, gt_dir))

    failures: list[str] = []

    def run_one(entry):
        job, job_dir, _ = entry
        try:
            backend_fn(job_dir)
            return None
        except Exception as exc:  # per-job failure, run continues
            return f"job {job.job_id} ({job.sequence}): backend failed: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, job_dirs))
    else:
        results = [run_one(entry) for entry in job_dirs]

    records: list[MetricRecord] = []
    stage_records: dict[str, list[MetricRecord]] = {stage: [] for stage in STAGES}
    for (job, job_dir, gt_dir), error in zip(job_dirs, results):
        if error is not None:
            failures.append(error)
            continue
        if not (job_dir / JOB_DONE).exists():
            failures.append(f"job {job.job_id} ({job.sequence}): backend wrote no {JOB_DONE}")
            continue
        try:
            job_records, job_stages = _score_job(job, job_dir, gt_dir, score_stages)
        except _ScoreError as exc:
            failures.append(f"job {job.job_id} ({job.sequence}): {exc}")
            continue
        records.extend(job_records)
        for stage, recs in job_stages.items():
            stage_records[stage].extend(recs)

    report = aggregate(records) if records else None
    if report is not None:
        write_report_csv(report, out_dir / "report.csv")
        (out_dir / "summary.txt").write_text(format_summary(report, backend) + "\n")
    stage_reports = {
        stage: aggregate(recs) if recs else None for stage, recs in stage_records.items()
    }
    return report, failures, stage_reports


class _ScoreError(RuntimeError):
    pass


def _score_job(job: InterpolationJob, job_dir: Path, gt_dir: Path, score_stages: bool):
    records = []
    stage_records: dict[str, list[MetricRecord]] = {stage: [] for stage in STAGES}
    for k, target in enumerate(job.targets):
        gt = load_image(gt_dir / f"t{k}.png")
        pred_path = job_dir / "out" / f"t{k}" / "prediction.png"
        if not pred_path.exists():
            raise _ScoreError(f"missing prediction for target {k}")
        pred = load_image(pred_path)
        if pred.shape != gt.shape:
            raise _ScoreError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
        records.append(
            MetricRecord(job.sequence, target.frame_index, target.skip_position, psnr(pred, gt), ssim(pred, gt))
        )
        if score_stages:
            for stage in STAGES:
                stage_path = (
                    pred_path
                    if stage == "attention"
                    else job_dir / "out" / f"t{k}" / f"stage_{stage}.png"
                )
                if not stage_path.exists():
                    continue
                img = load_image(stage_path)
                if img.shape != gt.shape:
                    continue
                stage_records[stage].append(
                    MetricRecord(
                        job.sequence, target.frame_index, target.skip_position, psnr(img, gt), ssim(img, gt)
                    )
                )
    return records, stage_records


def run_ablation(dataset_root, skip: int, backend: str, out_dir, **kwargs):
    """Score every pipeline stage a backend emits against ground truth.

    Produces one row per stage (warp, synthesis, refined, attention) in the
    order of the processing pipeline; stages the backend does not emit are
    marked absent.
    """
    out_dir = Path(out_dir)
    report, failures, stage_reports = run_benchmark(
        dataset_root, skip, backend, out_dir, score_stages=True, **kwargs
    )
    if report is None:
        raise BenchmarkError("ablation run scored no jobs: " + "; ".join(failures))

    lines = []
    csv_lines = ["stage,psnr_mean,psnr_std,ssim_mean,ssim_std"]
    for stage in STAGES:
        stage_report = stage_reports.get(stage)
        if stage_report is None:
            lines.append(f"{stage:<24} absent")
            csv_lines.append(f"{stage},,,,")
        else:
            lines.append(format_summary(stage_report, stage))
            csv_lines.append(
                f"{stage},{stage_report.psnr_mean:.6f},{stage_report.psnr_std:.6f},"
                f"{stage_report.ssim_mean:.6f},{stage_report.ssim_std:.6f}"
            )
    table = "\n".join(lines) + "\n"
    (out_dir / "ablation.txt").write_text(table)
    (out_dir / "ablation.csv").write_text("\n".join(csv_lines) + "\n")
    return stage_reports, failures


def run_rope(dataset_root, skip: int, backend: str, out_dir, **kwargs):
    """Average PSNR per skip position: how quality decays with distance from
    the keyframes. Needs skip >= 2 to be informative."""
    if skip < 2:
        raise ValueError("rope analysis needs skip >= 2")
    out_dir = Path(out_dir)
    report, failures, _ = run_benchmark(dataset_root, skip, backend, out_dir, **kwargs)
    if report is None:
        raise BenchmarkError("rope run scored no jobs: " + "; ".join(failures))
    lines = ["position,psnr_db"]
    for pos in sorted(report.position_psnr):
        lines.append(f"{pos},{report.position_psnr[pos]:.6f}")
    (out_dir / "rope.csv").write_text("\n".join(lines) + "\n")
    return report, failures


def run_interframe_ablation(dataset_root, skip: int, backend: str, out_dir, **kwargs):
    """Benchmark twice, with the real inter-frame events and with empty event
    windows, and report both rows."""
    out_dir = Path(out_dir)
    with_report, with_failures, _ = run_benchmark(
        dataset_root, skip, backend, out_dir / "with_events", events_mode="real", **kwargs
    )
    without_report, without_failures, _ = run_benchmark(
        dataset_root, skip, backend, out_dir / "without_events", events_mode="empty", **kwargs
    )
    if with_report is None or without_report is None:
        raise BenchmarkError("inter-frame ablation scored no jobs")
    table = (
        format_summary(with_report, "with events")
        + "\n"
        + format_summary(without_report, "without events")
        + "\n"
    )
    (out_dir / "interframe.txt").write_text(table)
    return (with_report, without_report), with_failures + without_failures


def attention_stats(out_dir) -> np.ndarray | None:
    """Mean per-candidate pixel-contribution fractions over every attention
    map found under a finished run directory."""
    out_dir = Path(out_dir)
    fractions = []
    for path in sorted(out_dir.glob("jobs/*/out/*/attention.vox1")):
        grid: VoxelGrid = read_voxel(path)
        fractions.append(contribution_stats(grid.values))
    if not fractions:
        return None
    return np.mean(np.stack(fractions), axis=0)
