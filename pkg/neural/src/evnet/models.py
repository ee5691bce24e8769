"""The four learned interpolation modules and their composition.

Images flow through the pipeline normalized to [0, 1]; conversion back to
[0, 255] happens only at the file boundary. The pipeline is:

1. synthesis: keyframes + the two event-window voxel grids -> new frame
2. flow: voxel grid of a target->keyframe window -> backward flow
3. refinement: (warped frame, synthesized frame) -> residual flow + re-warp
4. attention: candidates + flows + constant-tau channel -> blend scores
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .backbone import BASE_WIDTH, HourglassBackbone


def backward_warp(image: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Differentiable bilinear gather: sample image at (x+dx, y+dy).

    image: (N, C, H, W); flow: (N, 2, H, W) backward displacements.
    Out-of-image samples are zero-filled, matching the harness warp.
    """
    n, _, h, w = image.shape
    ys, xs = torch.meshgrid(
        torch.arange(h, dtype=image.dtype, device=image.device),
        torch.arange(w, dtype=image.dtype, device=image.device),
        indexing="ij",
    )
    sx = xs.unsqueeze(0) + flow[:, 0]
    sy = ys.unsqueeze(0) + flow[:, 1]
    # normalize to [-1, 1]; align_corners=True maps -1 to pixel 0, 1 to W-1
    gx = 2.0 * sx / max(w - 1, 1) - 1.0
    gy = 2.0 * sy / max(h - 1, 1) - 1.0
    grid = torch.stack([gx, gy], dim=-1)
    return F.grid_sample(image, grid, mode="bilinear", padding_mode="zeros", align_corners=True)


class SynthesisNet(nn.Module):
    """Directly regresses the new frame from keyframes and event volumes."""

    def __init__(self, bins: int, base_width: int = BASE_WIDTH):
        super().__init__()
        self.bins = bins
        self.net = HourglassBackbone(6 + 2 * bins, 3, base_width)

    def forward(self, left, right, voxel_left, voxel_right):
        return self.net(torch.cat([left, right, voxel_left, voxel_right], dim=1))


# Fixed output gains on the zero-initialized flow heads. Adam moves weights
# by roughly the learning rate per step, so within a short schedule the raw
# head output stays small; the gain maps that range onto pixel-scale flows.
# The refinement head corrects residual misalignments of a couple of pixels
# and trains more stably with a smaller gain than the primary flow head.
FLOW_OUTPUT_GAIN = 50.0
REFINE_OUTPUT_GAIN = 25.0


class FlowNet(nn.Module):
    """Backward flow from the voxel grid of a target->keyframe event window.

    Applied twice per target: once on the reversed left window for
    target->left flow, once on the right window for target->right flow.
    The head is zero-initialized (zero flow at init); a fixed output gain
    scales the regressed values into pixel units.
    """

    def __init__(self, bins: int, base_width: int = BASE_WIDTH):
        super().__init__()
        self.bins = bins
        self.net = HourglassBackbone(bins, 2, base_width)

    def forward(self, voxel):
        return FLOW_OUTPUT_GAIN * self.net(voxel)


class RefineNet(nn.Module):
    """Residual flow between a warped frame and the synthesis estimate.

    Returns (residual_flow, refined) where refined re-warps the input. With
    the zero-initialized head the module starts as the identity.
    """

    def __init__(self, base_width: int = BASE_WIDTH):
        super().__init__()
        self.net = HourglassBackbone(6, 2, base_width)

    def forward(self, warped, synthesized):
        residual = REFINE_OUTPUT_GAIN * self.net(torch.cat([warped, synthesized], dim=1))
        refined = backward_warp(warped, residual)
        return residual, refined


class AttentionNet(nn.Module):
    """Per-pixel blend scores for (refined_left, refined_right, synthesis).

    Consumes the three candidates, both flows and the interpolation position
    tau as a constant channel.
    """

    def __init__(self, base_width: int = BASE_WIDTH):
        super().__init__()
        self.net = HourglassBackbone(3 * 3 + 2 * 2 + 1, 3, base_width)

    def forward(self, refined_left, refined_right, synthesized, flow_left, flow_right, tau):
        n, _, h, w = refined_left.shape
        if not torch.is_tensor(tau):
            tau = torch.full((n,), float(tau), dtype=refined_left.dtype, device=refined_left.device)
        tau_plane = tau.view(n, 1, 1, 1).expand(n, 1, h, w)
        scores = self.net(
            torch.cat([refined_left, refined_right, synthesized, flow_left, flow_right, tau_plane], dim=1)
        )
        return scores


def blend_candidates(scores: torch.Tensor, candidates: torch.Tensor) -> torch.Tensor:
    """Softmax-weighted pixel-wise average.

    scores: (N, 3, H, W); candidates: (N, 3, C, H, W).
    """
    weights = torch.softmax(scores, dim=1).unsqueeze(2)
    return (weights * candidates).sum(dim=1)


@dataclass
class PipelineOutput:
    prediction: torch.Tensor
    synthesis: torch.Tensor
    warp_left: torch.Tensor
    warp_right: torch.Tensor
    refined_left: torch.Tensor
    refined_right: torch.Tensor
    flow_left: torch.Tensor
    flow_right: torch.Tensor
    scores: torch.Tensor


class InterpolationPipeline(nn.Module):
    """All four modules wired in the processing order."""

    def __init__(self, bins: int, base_width: int = BASE_WIDTH):
        super().__init__()
        self.bins = bins
        self.synthesis = SynthesisNet(bins, base_width)
        self.flow = FlowNet(bins, base_width)
        self.refine = RefineNet(base_width)
        self.attention = AttentionNet(base_width)

    def forward(self, batch) -> PipelineOutput:
        left, right = batch["left"], batch["right"]
        syn = self.synthesis(left, right, batch["voxel_left"], batch["voxel_right"])
        flow_left = self.flow(batch["voxel_reversed"])
        flow_right = self.flow(batch["voxel_right"])
        warp_left = backward_warp(left, flow_left)
        warp_right = backward_warp(right, flow_right)
        _, refined_left = self.refine(warp_left, syn)
        _, refined_right = self.refine(warp_right, syn)
        scores = self.attention(refined_left, refined_right, syn, flow_left, flow_right, batch["tau"])
        candidates = torch.stack([refined_left, refined_right, syn], dim=1)
        prediction = blend_candidates(scores, candidates)
        return PipelineOutput(
            prediction=prediction,
            synthesis=syn,
            warp_left=warp_left,
            warp_right=warp_right,
            refined_left=refined_left,
            refined_right=refined_right,
            flow_left=flow_left,
            flow_right=flow_right,
            scores=scores,
        )

    STAGES = ("synthesis", "warping", "refinement", "attention")

    def stage_modules(self, stage: str) -> nn.Module:
        return {
            "synthesis": self.synthesis,
            "warping": self.flow,
            "refinement": self.refine,
            "attention": self.attention,
        }[stage]
