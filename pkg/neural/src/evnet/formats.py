"""Readers and writers for the harness interchange formats.

The backend talks to the benchmark harness only through files: EVT1 event
recordings, VOX1 voxel grids, PNG frames and key=value manifests. The
layouts match the harness documentation; nothing here links against the
harness itself.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

EVT1_MAGIC = b"EVT1"
_EVT1_HEADER = struct.Struct("<4sIIIQ")
_EVT1_FOOTER = struct.Struct("<Q")
_EVT1_RECORD = np.dtype(
    {"names": ["t", "x", "y", "p"], "formats": ["<u8", "<u2", "<u2", "i1"],
     "offsets": [0, 8, 10, 12], "itemsize": 13}
)

VOX1_MAGIC = b"VOX1"
_VOX1_HEADER = struct.Struct("<4sIII")


class Events:
    """Flat event arrays plus their window and sensor geometry."""

    def __init__(self, t, x, y, p, window, width, height):
        self.t = np.asarray(t, dtype=np.int64)
        self.x = np.asarray(x, dtype=np.int64)
        self.y = np.asarray(y, dtype=np.int64)
        self.p = np.asarray(p, dtype=np.int64)
        self.window = (int(window[0]), int(window[1]))
        self.width = int(width)
        self.height = int(height)

    def __len__(self):
        return len(self.t)

    def slice(self, a: int, b: int) -> "Events":
        lo = np.searchsorted(self.t, a, side="left")
        hi = np.searchsorted(self.t, b, side="right")
        return Events(self.t[lo:hi], self.x[lo:hi], self.y[lo:hi], self.p[lo:hi],
                      (a, b), self.width, self.height)

    def reversed(self) -> "Events":
        t0, t1 = self.window
        t = t0 + t1 - self.t
        order = np.argsort(t, kind="stable")
        return Events(t[order], self.x[order], self.y[order], -self.p[order],
                      self.window, self.width, self.height)


def read_events(path) -> Events:
    data = Path(path).read_bytes()
    magic, width, height, _, t_begin = _EVT1_HEADER.unpack_from(data, 0)
    if magic != EVT1_MAGIC:
        raise ValueError(f"{path}: not an EVT1 file")
    (t_end,) = _EVT1_FOOTER.unpack_from(data, len(data) - _EVT1_FOOTER.size)
    records = np.frombuffer(data[_EVT1_HEADER.size:-_EVT1_FOOTER.size], dtype=_EVT1_RECORD)
    return Events(records["t"].astype(np.int64), records["x"], records["y"], records["p"],
                  (t_begin, t_end), width, height)


def voxelize(events: Events, bins: int) -> np.ndarray:
    """Bilinear temporal binning, matching the harness voxel definition."""
    grid = np.zeros((bins, events.height, events.width), dtype=np.float64)
    if len(events) == 0:
        return grid.astype(np.float32)
    t0, t1 = events.window
    span = t1 - t0
    if span > 0 and bins > 1:
        tstar = (bins - 1) * (events.t - t0).astype(np.float64) / span
    else:
        tstar = np.zeros(len(events), dtype=np.float64)
    b0 = np.floor(tstar).astype(np.int64)
    frac = tstar - b0
    pol = events.p.astype(np.float64)
    np.add.at(grid, (b0, events.y, events.x), pol * (1.0 - frac))
    hi = b0 + 1
    mask = hi <= bins - 1
    if mask.any():
        np.add.at(grid, (hi[mask], events.y[mask], events.x[mask]), pol[mask] * frac[mask])
    return grid.astype(np.float32)


def read_voxel(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, b, h, w = _VOX1_HEADER.unpack_from(data, 0)
    if magic != VOX1_MAGIC:
        raise ValueError(f"{path}: not a VOX1 file")
    return np.frombuffer(data[_VOX1_HEADER.size:], dtype="<f4").reshape(b, h, w).copy()


def write_voxel(values: np.ndarray, path) -> None:
    b, h, w = values.shape
    with open(path, "wb") as f:
        f.write(_VOX1_HEADER.pack(VOX1_MAGIC, b, h, w))
        f.write(values.astype("<f4").tobytes(order="C"))


def load_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_png(pixels: np.ndarray, path) -> None:
    arr = np.clip(np.rint(np.asarray(pixels)), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def read_kv(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_kv(path, mapping) -> None:
    with open(path, "w") as f:
        for key, value in mapping.items():
            f.write(f"{key}={value}\n")
