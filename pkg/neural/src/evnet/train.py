"""Staged training: one module at a time, earlier modules frozen.

Stage order is fixed: synthesis, then event-flow warping, then warping
refinement, then attention averaging. Each stage optimizes only its own
module with Adam while every previously trained module is frozen (gradients
off and excluded from the optimizer), so earlier weights stay bitwise
identical. The learning rate decays once per stage, by ``decay_factor`` at
``decay_epoch``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .backbone import BASE_WIDTH
from .data import Sample, collate, load_split
from .losses import ReconstructionLoss
from .models import InterpolationPipeline, backward_warp, blend_candidates

STAGE_ORDER = ("synthesis", "warping", "refinement", "attention")


class StageDivergence(RuntimeError):
    def __init__(self, stage: str):
        super().__init__(f"training diverged (non-finite loss) in stage {stage!r}")
        self.stage = stage


@dataclass
class TrainingConfig:
    batch_size: int = 4
    learning_rate: float = 1e-4
    decay_factor: float = 0.1
    decay_epoch: int = 4  # 1-based epoch at which lr is multiplied once
    epochs_per_stage: int = 5
    l1_weight: float = 1.0
    perceptual_weight: float = 0.05
    skips: tuple[int, ...] = (1, 3)
    bins: int = 5
    base_width: int = BASE_WIDTH
    seed: int = 0
    deterministic: bool = True
    stage_order: tuple[str, ...] = STAGE_ORDER

    def __post_init__(self):
        positive = [
            self.batch_size, self.learning_rate, self.decay_factor, self.decay_epoch,
            self.epochs_per_stage, self.bins, self.base_width, *self.skips,
        ]
        if any(v <= 0 for v in positive):
            raise ValueError("training config values must be positive")
        if tuple(self.stage_order) != STAGE_ORDER:
            raise ValueError(f"stage order must be {STAGE_ORDER}")


@dataclass
class TrainResult:
    checkpoint: Path
    stage_losses: dict[str, list[float]] = field(default_factory=dict)


def _stage_loss(pipeline, stage, batch, criterion):
    target = batch["target"]
    if stage == "synthesis":
        syn = pipeline.synthesis(
            batch["left"], batch["right"], batch["voxel_left"], batch["voxel_right"]
        )
        return criterion(syn, target)
    if stage == "warping":
        flow_left = pipeline.flow(batch["voxel_reversed"])
        flow_right = pipeline.flow(batch["voxel_right"])
        warped_left = backward_warp(batch["left"], flow_left)
        warped_right = backward_warp(batch["right"], flow_right)
        return criterion(warped_left, target) + criterion(warped_right, target)
    if stage == "refinement":
        with torch.no_grad():
            syn = pipeline.synthesis(
                batch["left"], batch["right"], batch["voxel_left"], batch["voxel_right"]
            )
            warped_left = backward_warp(batch["left"], pipeline.flow(batch["voxel_reversed"]))
            warped_right = backward_warp(batch["right"], pipeline.flow(batch["voxel_right"]))
        _, refined_left = pipeline.refine(warped_left, syn)
        _, refined_right = pipeline.refine(warped_right, syn)
        return criterion(refined_left, target) + criterion(refined_right, target)
    if stage == "attention":
        with torch.no_grad():
            syn = pipeline.synthesis(
                batch["left"], batch["right"], batch["voxel_left"], batch["voxel_right"]
            )
            flow_left = pipeline.flow(batch["voxel_reversed"])
            flow_right = pipeline.flow(batch["voxel_right"])
            _, refined_left = pipeline.refine(backward_warp(batch["left"], flow_left), syn)
            _, refined_right = pipeline.refine(backward_warp(batch["right"], flow_right), syn)
            candidates = torch.stack([refined_left, refined_right, syn], dim=1)
        scores = pipeline.attention(
            refined_left, refined_right, syn, flow_left, flow_right, batch["tau"]
        )
        return criterion(blend_candidates(scores, candidates), target)
    raise ValueError(f"unknown stage {stage!r}")


def _evaluate_stage_loss(pipeline, stage, samples, config, criterion) -> float:
    losses = []
    with torch.no_grad():
        for start in range(0, len(samples), config.batch_size):
            batch = collate(samples[start : start + config.batch_size])
            losses.append(float(_stage_loss(pipeline, stage, batch, criterion)))
    return float(np.mean(losses))


def train_stage(pipeline, stage, samples, config, rng) -> dict:
    """Train one stage; returns the untrained loss and each epoch's mean."""
    for p in pipeline.parameters():
        p.requires_grad_(False)
    module = pipeline.stage_modules(stage)
    for p in module.parameters():
        p.requires_grad_(True)

    criterion = ReconstructionLoss(config.l1_weight, config.perceptual_weight)
    optimizer = torch.optim.Adam(module.parameters(), lr=config.learning_rate)
    initial = _evaluate_stage_loss(pipeline, stage, samples, config, criterion)

    epoch_losses = []
    for epoch in range(config.epochs_per_stage):
        if epoch + 1 == config.decay_epoch:
            for group in optimizer.param_groups:
                group["lr"] *= config.decay_factor
        order = rng.permutation(len(samples))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = collate([samples[i] for i in order[start : start + config.batch_size]])
            optimizer.zero_grad()
            loss = _stage_loss(pipeline, stage, batch, criterion)
            if not torch.isfinite(loss):
                raise StageDivergence(stage)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        epoch_losses.append(float(np.mean(losses)))
    return {"initial": initial, "epochs": epoch_losses}


def staged_train(dataset_root, config: TrainingConfig, checkpoint_path) -> TrainResult:
    """Run all four stages over the train split and write one checkpoint."""
    if config.deterministic:
        torch.use_deterministic_algorithms(True)
    torch.manual_seed(config.seed)
    samples = load_split(dataset_root, "train", config.skips, config.bins)
    if not samples:
        raise ValueError(f"no training samples under {dataset_root}")

    pipeline = InterpolationPipeline(config.bins, config.base_width)
    rng = np.random.default_rng(config.seed)

    stage_losses = {}
    for stage in config.stage_order:
        stage_losses[stage] = train_stage(pipeline, stage, samples, config, rng)

    checkpoint_path = Path(checkpoint_path)
    checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "state": pipeline.state_dict(),
            "config": asdict(config),
            "stage_losses": stage_losses,
        },
        checkpoint_path,
    )
    return TrainResult(checkpoint=checkpoint_path, stage_losses=stage_losses)


def load_pipeline(checkpoint_path) -> tuple[InterpolationPipeline, dict]:
    payload = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
    config = payload["config"]
    pipeline = InterpolationPipeline(config["bins"], config["base_width"])
    pipeline.load_state_dict(payload["state"])
    pipeline.eval()
    return pipeline, config


# ---------------------------------------------------------------------------
# Evaluation helpers
# ---------------------------------------------------------------------------

def quantized_psnr(prediction: torch.Tensor, target: torch.Tensor) -> float:
    """PSNR after quantizing both [0,1] images to 8-bit, as the harness does."""
    a = torch.clamp(torch.round(prediction * 255.0), 0, 255)
    b = torch.clamp(torch.round(target * 255.0), 0, 255)
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return 100.0
    return 10.0 * math.log10(255.0**2 / mse)


def evaluate_stages(pipeline, samples: list[Sample], batch_size: int = 8) -> dict[str, float]:
    """Mean PSNR of every pipeline stage over a sample list."""
    totals: dict[str, list[float]] = {
        "warp": [], "synthesis": [], "refined": [], "attention": []
    }
    pipeline.eval()
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            batch = collate(samples[start : start + batch_size])
            out = pipeline(batch)
            for i in range(batch["target"].shape[0]):
                t = batch["target"][i]
                totals["warp"].append(quantized_psnr(out.warp_left[i], t))
                totals["synthesis"].append(quantized_psnr(out.synthesis[i], t))
                totals["refined"].append(quantized_psnr(out.refined_left[i], t))
                totals["attention"].append(quantized_psnr(out.prediction[i], t))
    return {k: float(np.mean(v)) for k, v in totals.items()}
