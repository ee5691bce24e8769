"""Training samples from the on-disk dataset layout.

Sequences follow the harness layout (images/%06d.png, timestamps.txt,
events.evt1, meta.txt). For a skip width S every in-between frame becomes one
supervised sample: keyframes, the target, its normalized position tau, and
the three event-window voxel grids the pipeline consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .formats import Events, load_png, read_events, read_kv, voxelize


@dataclass
class Sample:
    left: np.ndarray  # (3, H, W) float32 in [0, 1]
    right: np.ndarray
    target: np.ndarray
    voxel_left: np.ndarray  # V left->target
    voxel_right: np.ndarray  # V target->right
    voxel_reversed: np.ndarray  # V target->left
    tau: float


def _to_chw(img: np.ndarray) -> np.ndarray:
    return (img.astype(np.float32) / 255.0).transpose(2, 0, 1)


def sample_windows(events: Events, t_left: int, t_target: int, t_right: int, bins: int):
    left_window = events.slice(t_left, t_target)
    right_window = events.slice(t_target, t_right)
    return (
        voxelize(left_window, bins),
        voxelize(right_window, bins),
        voxelize(left_window.reversed(), bins),
    )


def load_split(root, split: str, skips, bins: int) -> list[Sample]:
    """All supervised samples of one dataset split, deterministic order.

    ``skips`` is an int or an iterable of skip widths; mixing widths varies
    the displacement magnitudes and tau positions the modules see.
    """
    if isinstance(skips, int):
        skips = (skips,)
    root = Path(root)
    samples: list[Sample] = []
    for seq_dir in sorted(p for p in root.iterdir() if (p / "timestamps.txt").exists()):
        meta = read_kv(seq_dir / "meta.txt") if (seq_dir / "meta.txt").exists() else {}
        if meta.get("split", "test") != split:
            continue
        timestamps = [int(v) for v in (seq_dir / "timestamps.txt").read_text().split()]
        frames = sorted((seq_dir / "images").glob("*.png"))
        events = read_events(seq_dir / "events.evt1")
        images: dict[int, np.ndarray] = {}

        def image(idx):
            if idx not in images:
                images[idx] = _to_chw(load_png(frames[idx]))
            return images[idx]

        for skip in skips:
            step = skip + 1
            for left in range(0, len(frames) - step, step):
                right = left + step
                for idx in range(left + 1, right):
                    vl, vr, vrev = sample_windows(
                        events, timestamps[left], timestamps[idx], timestamps[right], bins
                    )
                    samples.append(
                        Sample(
                            left=image(left),
                            right=image(right),
                            target=image(idx),
                            voxel_left=vl,
                            voxel_right=vr,
                            voxel_reversed=vrev,
                            tau=(timestamps[idx] - timestamps[left])
                            / (timestamps[right] - timestamps[left]),
                        )
                    )
    return samples


def collate(samples: list[Sample]) -> dict[str, torch.Tensor]:
    def stack(field):
        return torch.from_numpy(np.stack([getattr(s, field) for s in samples]))

    return {
        "left": stack("left"),
        "right": stack("right"),
        "target": stack("target"),
        "voxel_left": stack("voxel_left"),
        "voxel_right": stack("voxel_right"),
        "voxel_reversed": stack("voxel_reversed"),
        "tau": torch.tensor([s.tau for s in samples], dtype=torch.float32),
    }
