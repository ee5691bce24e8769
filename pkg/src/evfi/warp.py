"""Backward warping with bilinear sampling, validity masks and .flo I/O.

Flow fields are (H, W, 2) arrays holding per-pixel backward displacements
(dx, dy): the sample location in the source image for target pixel (y, x) is
(x + dx, y + dy). Warping gathers from the source, so the output has no holes;
samples whose bilinear footprint leaves the source are zero-filled and marked
invalid, leaving occlusion handling to downstream blending.

Flow files use the Middlebury .flo layout: float32 magic 202021.25, width and
height as int32, then interleaved (dx, dy) float32 pairs row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

FLO_MAGIC = 202021.25


@dataclass(frozen=True, eq=False)
class WarpResult:
    """Warped image plus per-pixel validity of the sampling footprint."""

    image: np.ndarray
    validity: np.ndarray


def _as_flow(flow) -> np.ndarray:
    arr = np.asarray(flow, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("flow must have shape (H, W, 2)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("flow values must be finite")
    return arr


def backward_warp(source: np.ndarray, flow) -> WarpResult:
    """Sample ``source`` at flow-displaced coordinates with bilinear taps.

    Out-of-image taps contribute zero; a pixel is valid only when its
    continuous sample location stays inside [0, W-1] x [0, H-1]. Zero flow
    reproduces the source bit-exactly with an all-true mask.
    """
    src = np.asarray(source, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    h, w = src.shape[:2]
    f = _as_flow(flow)
    if f.shape[:2] != (h, w):
        raise ValueError(f"flow shape {f.shape[:2]} does not match image {h, w}")

    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + f[:, :, 0]
    sy = ys + f[:, :, 1]
    validity = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0

    out = np.zeros_like(src)
    for dy in (0, 1):
        for dx in (0, 1):
            tx = x0 + dx
            ty = y0 + dy
            wx = fx if dx else 1.0 - fx
            wy = fy if dy else 1.0 - fy
            weight = wx * wy
            inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
            txc = np.clip(tx, 0, w - 1)
            tyc = np.clip(ty, 0, h - 1)
            tap = src[tyc, txc]
            out += np.where(inside, weight, 0.0)[:, :, None] * tap

    if squeeze:
        out = out[:, :, 0]
    return WarpResult(out, validity)


def scale_flow(flow, factor: float) -> np.ndarray:
    """Elementwise flow scaling; the linear-motion baseline uses
    F_warp_to_left = -tau * F_left_to_right."""
    if not np.isfinite(factor):
        raise ValueError("scale factor must be finite")
    return _as_flow(flow) * float(factor)


def compose_refinement(base: WarpResult, residual_flow) -> WarpResult:
    """Re-warp an already warped image with a residual flow.

    The result is valid where the new bilinear footprint is inside the image
    and every tap it touches with nonzero weight was itself valid in ``base``.
    """
    f = _as_flow(residual_flow)
    if f.shape[:2] != base.image.shape[:2]:
        raise ValueError("residual flow dimensions do not match the warped image")
    warped = backward_warp(base.image, f)

    h, w = base.validity.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + f[:, :, 0]
    sy = ys + f[:, :, 1]
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0

    taps_valid = np.ones((h, w), dtype=bool)
    for dy in (0, 1):
        for dx in (0, 1):
            tx = x0 + dx
            ty = y0 + dy
            wx = fx if dx else 1.0 - fx
            wy = fy if dy else 1.0 - fy
            weight = wx * wy
            inside = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
            tap_ok = np.where(inside, base.validity[np.clip(ty, 0, h - 1), np.clip(tx, 0, w - 1)], False)
            taps_valid &= (weight == 0) | tap_ok

    return WarpResult(warped.image, warped.validity & taps_valid)


# ---------------------------------------------------------------------------
# Middlebury .flo serialization
# ---------------------------------------------------------------------------

def write_flo(flow, path) -> None:
    f = _as_flow(flow)
    h, w = f.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLO_MAGIC, w, h))
        fh.write(f.astype("<f4").tobytes(order="C"))


def read_flo(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise FormatError(f"{path}: truncated .flo file")
    magic, w, h = struct.unpack_from("<fii", data, 0)
    if abs(magic - FLO_MAGIC) > 1e-3:
        raise FormatError(f"{path}: bad .flo magic {magic}")
    body = data[12:]
    expected = w * h * 2 * 4
    if len(body) != expected:
        raise FormatError(f"{path}: expected {expected} flow bytes, found {len(body)}")
    flow = np.frombuffer(body, dtype="<f4").reshape(h, w, 2).astype(np.float64)
    if not np.all(np.isfinite(flow)):
        raise FormatError(f"{path}: flow contains non-finite values")
    return flow
