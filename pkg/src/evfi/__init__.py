"""Event-based video frame interpolation toolkit.

Event simulation from video, voxel-grid event representations, flow-based
warping and attention blending, synchronized dataset ingestion, and a
skip-frame benchmark harness with a directory-based backend protocol.
"""

from .blend import blend, contribution_stats
from .events import (
    Event,
    EventStream,
    group_between_frames,
    read_binary,
    read_text,
    reverse_stream,
    slice_stream,
    write_binary,
    write_text,
)
from .images import Frame, load_image, save_image, to_luma
from .metrics import MetricRecord, MetricReport, aggregate, psnr, ssim
from .simulator import SimulatorConfig, events_from_log_signal, simulate
from .voxel import VoxelGrid, build_voxel_grid, normalize_voxel_grid, read_voxel, write_voxel
from .warp import WarpResult, backward_warp, compose_refinement, read_flo, scale_flow, write_flo

__version__ = "0.1.0"

__all__ = [
    "Event",
    "EventStream",
    "Frame",
    "MetricRecord",
    "MetricReport",
    "SimulatorConfig",
    "VoxelGrid",
    "WarpResult",
    "aggregate",
    "backward_warp",
    "blend",
    "build_voxel_grid",
    "compose_refinement",
    "contribution_stats",
    "events_from_log_signal",
    "group_between_frames",
    "load_image",
    "normalize_voxel_grid",
    "psnr",
    "read_binary",
    "read_flo",
    "read_text",
    "read_voxel",
    "reverse_stream",
    "save_image",
    "scale_flow",
    "simulate",
    "slice_stream",
    "ssim",
    "to_luma",
    "write_binary",
    "write_flo",
    "write_text",
    "write_voxel",
]
