"""Job-directory backend: the harness interchange protocol consumer.

Reads one materialized job directory (keyframes, per-target voxel grids,
key=value manifest), runs the four-module pipeline, and writes per-target
predictions plus every intermediate stage image, the attention score maps,
and the ``job.done`` sentinel. A ``backend.txt`` manifest in the output
directory declares which intermediates are emitted.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .formats import load_png, read_kv, read_voxel, save_png, write_kv, write_voxel

EMITTED_INTERMEDIATES = {
    "emits_stage_warp": "true",
    "emits_stage_synthesis": "true",
    "emits_stage_refined": "true",
    "emits_attention_maps": "true",
}


def _to_tensor_image(path) -> torch.Tensor:
    arr = load_png(path).astype(np.float32) / 255.0
    return torch.from_numpy(arr.transpose(2, 0, 1)).unsqueeze(0)


def _to_png_image(tensor: torch.Tensor) -> np.ndarray:
    arr = tensor.squeeze(0).detach().numpy().transpose(1, 2, 0)
    return arr * 255.0


def process_job(pipeline, job_dir) -> None:
    """Run the pipeline over every target of one job directory."""
    job_dir = Path(job_dir)
    manifest = read_kv(job_dir / "job.txt")
    bins = int(manifest["bins"])
    if bins != pipeline.bins:
        raise ValueError(
            f"job provides {bins}-bin voxel grids but the checkpoint expects {pipeline.bins}"
        )
    left = _to_tensor_image(job_dir / "keyframe_left.png")
    right = _to_tensor_image(job_dir / "keyframe_right.png")

    pipeline.eval()
    with torch.no_grad():
        for k in range(int(manifest["n_targets"])):
            tdir = job_dir / "targets" / f"t{k}"
            batch = {
                "left": left,
                "right": right,
                "voxel_left": torch.from_numpy(read_voxel(tdir / "voxel_left.vox1")).unsqueeze(0),
                "voxel_right": torch.from_numpy(read_voxel(tdir / "voxel_right.vox1")).unsqueeze(0),
                "voxel_reversed": torch.from_numpy(
                    read_voxel(tdir / "voxel_reversed.vox1")
                ).unsqueeze(0),
                "tau": torch.tensor([float(manifest[f"target_{k}_tau"])]),
            }
            out = pipeline(batch)
            out_dir = job_dir / "out" / f"t{k}"
            out_dir.mkdir(parents=True, exist_ok=True)
            save_png(_to_png_image(out.prediction), out_dir / "prediction.png")
            save_png(_to_png_image(out.warp_left), out_dir / "stage_warp.png")
            save_png(_to_png_image(out.synthesis), out_dir / "stage_synthesis.png")
            save_png(_to_png_image(out.refined_left), out_dir / "stage_refined.png")
            write_voxel(out.scores.squeeze(0).numpy(), out_dir / "attention.vox1")
    write_kv(job_dir / "out" / "backend.txt", EMITTED_INTERMEDIATES)
    (job_dir / "job.done").touch()
