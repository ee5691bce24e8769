"""Timestamped frames, PNG I/O and color helpers.

Frames are 8-bit RGB (H x W x 3 uint8) with a timestamp in integer
microseconds. Intermediate image math elsewhere in the package runs on
real-valued arrays in [0, 255]; quantization back to uint8 happens only when
an image is written to disk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class Frame:
    """8-bit RGB image sampled at time ``t`` (microseconds)."""

    t: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.dtype != np.uint8:
            raise ValueError("frame pixels must be uint8")
        if self.pixels.ndim not in (2, 3):
            raise ValueError("frame pixels must be HxW or HxWx3")
        if self.pixels.ndim == 3 and self.pixels.shape[2] != 3:
            raise ValueError("color frames must have 3 channels")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def to_luma(pixels: np.ndarray) -> np.ndarray:
    """Rec.601 luma as float64; grayscale input passes through."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    r, g, b = LUMA_WEIGHTS
    return r * arr[..., 0] + g * arr[..., 1] + b * arr[..., 2]


def load_image(path) -> np.ndarray:
    """Load a PNG as uint8 RGB (H x W x 3)."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(pixels: np.ndarray, path) -> None:
    """Quantize a real-valued [0, 255] image to uint8 and write a PNG."""
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")
