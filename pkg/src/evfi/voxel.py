"""Voxel-grid tensorization of event windows.

Events in a window [t0, t1] are spread over B temporal bins with a bilinear
kernel: an event at normalized time t* = (B-1)(t - t0)/(t1 - t0) contributes
p * max(0, 1 - |b - t*|) to bin b at its pixel, so each event deposits total
weight 1 (signed by polarity) split between its two nearest bins.

On-disk container (VOX1): magic ``VOX1``, then B, H, W as little-endian u32,
then B*H*W little-endian float32 values, bin-major then row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .events import EventStream

VOX1_MAGIC = b"VOX1"
_VOX1_HEADER = struct.Struct("<4sIII")

DEFAULT_BINS = 5


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """B x H x W tensor built from one event window.

    Values are kept in float64 in memory (accumulation error stays below
    mass-conservation tolerances); the on-disk container quantizes to
    float32.
    """

    values: np.ndarray
    source_window: tuple[int, int]

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("voxel values must have shape (bins, height, width)")
        if self.values.shape[0] < 1:
            raise ValueError("voxel grid needs at least one bin")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("voxel values must be finite")

    @property
    def bins(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def build_voxel_grid(stream: EventStream, bins: int = DEFAULT_BINS) -> VoxelGrid:
    """Accumulate an event stream into a B-bin voxel grid.

    Accumulation runs in float64; quantization to float32 happens only in
    the on-disk container. With a degenerate window (t0 == t1) every event
    lands in bin 0. An empty stream produces an all-zero grid.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    h, w = stream.sensor_height, stream.sensor_width
    acc = np.zeros((bins, h, w), dtype=np.float64)
    n = len(stream)
    if n == 0:
        return VoxelGrid(acc, stream.window)

    t0, t1 = stream.window
    span = t1 - t0
    if span > 0 and bins > 1:
        tstar = (bins - 1) * (stream.t - t0).astype(np.float64) / span
    else:
        tstar = np.zeros(n, dtype=np.float64)

    b0 = np.floor(tstar).astype(np.int64)
    frac = tstar - b0
    pol = stream.p.astype(np.float64)

    np.add.at(acc, (b0, stream.y, stream.x), pol * (1.0 - frac))
    upper = b0 + 1
    m = upper <= bins - 1
    if m.any():
        np.add.at(acc, (upper[m], stream.y[m], stream.x[m]), pol[m] * frac[m])

    return VoxelGrid(acc, stream.window)


def normalize_voxel_grid(grid: VoxelGrid, mode: str = "none") -> VoxelGrid:
    """Optionally rescale a grid for use as network input.

    ``none`` returns the grid unchanged. ``unit_std`` divides every value by
    the standard deviation of the nonzero entries; zero entries stay zero and
    a grid with no nonzero entries (or zero spread) is returned unchanged.
    """
    if mode == "none":
        return grid
    if mode != "unit_std":
        raise ValueError(f"unknown normalization mode {mode!r}")
    nonzero = grid.values[grid.values != 0]
    if nonzero.size == 0:
        return grid
    std = float(np.std(nonzero.astype(np.float64)))
    if std <= 0.0:
        return grid
    return VoxelGrid(grid.values / std, grid.source_window)


def write_voxel(grid: VoxelGrid, path) -> None:
    with open(path, "wb") as f:
        f.write(_VOX1_HEADER.pack(VOX1_MAGIC, grid.bins, grid.height, grid.width))
        f.write(grid.values.astype("<f4").tobytes(order="C"))


def read_voxel(path, source_window=(0, 0)) -> VoxelGrid:
    data = Path(path).read_bytes()
    if len(data) < _VOX1_HEADER.size:
        raise FormatError(f"{path}: truncated VOX1 file")
    magic, b, h, w = _VOX1_HEADER.unpack_from(data, 0)
    if magic != VOX1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    body = data[_VOX1_HEADER.size :]
    expected = b * h * w * 4
    if len(body) != expected:
        raise FormatError(f"{path}: expected {expected} value bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f4").reshape(b, h, w).astype(np.float64)
    return VoxelGrid(values, (int(source_window[0]), int(source_window[1])))
