"""Toy-scale learned event-based frame interpolation backend."""

from .backbone import HourglassBackbone
from .models import (
    AttentionNet,
    FlowNet,
    InterpolationPipeline,
    RefineNet,
    SynthesisNet,
    backward_warp,
    blend_candidates,
)
from .train import StageDivergence, TrainingConfig, load_pipeline, staged_train

__version__ = "0.1.0"

__all__ = [
    "AttentionNet",
    "FlowNet",
    "HourglassBackbone",
    "InterpolationPipeline",
    "RefineNet",
    "StageDivergence",
    "SynthesisNet",
    "TrainingConfig",
    "backward_warp",
    "blend_candidates",
    "load_pipeline",
    "staged_train",
]
