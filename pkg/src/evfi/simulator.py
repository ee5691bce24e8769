"""Contrast-threshold event simulation from timestamped frame sequences.

Each pixel keeps a reference log intensity, initialized from the first frame
with L(I) = ln(I/255 + log_eps). Between consecutive frames the log intensity
is taken to vary linearly in time; every time it crosses the reference plus
c_pos (or minus c_neg) an event fires at the interpolated crossing time,
rounded to the nearest microsecond, and the reference steps by the threshold.
Crossings exactly at a segment end are emitted with that segment (inclusive
end, exclusive start), so consecutive segments never double-report.

Color input is converted to luma before the log transform; the simulated
sensor is monochrome. There is no refractory period and no background noise;
``jitter_std`` adds optional per-pixel threshold spread for robustness tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .events import EventStream, canonical_order
from .images import Frame, to_luma

_MIN_THRESHOLD = 0.01  # floor for jittered per-pixel thresholds


@dataclass(frozen=True)
class SimulatorConfig:
    """Sensor model parameters.

    c_pos / c_neg are the positive and negative contrast thresholds in
    log-intensity units; log_eps is the additive constant inside the log
    transform; jitter_std (0 disables) draws per-pixel thresholds from a
    normal around the nominal values using ``seed``.
    """

    c_pos: float = 0.2
    c_neg: float = 0.2
    log_eps: float = 1e-3
    jitter_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.c_pos <= 0 or self.c_neg <= 0:
            raise ValueError("contrast thresholds must be positive")
        if self.log_eps <= 0:
            raise ValueError("log_eps must be positive")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be >= 0")


def log_intensity(pixels: np.ndarray, log_eps: float) -> np.ndarray:
    """ln(I/255 + log_eps) on the luma of an 8-bit frame."""
    return np.log(to_luma(pixels) / 255.0 + log_eps)


def _ladder_events(l_ref, l_seg_a, d, t_a, t_b, counts, step, pix):
    """Crossing times for ``counts`` evenly spaced thresholds per pixel.

    The k-th event (k = 1..counts) fires where the signal meets
    ``l_ref + k * step``; ``step`` is the signed threshold spacing and ``d``
    the (signed, nonzero) log change over the segment. Returns flat
    (time, pixel index) arrays.
    """
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.float64), np.empty(0, dtype=np.int64)
    rep = np.repeat(np.arange(len(counts)), counts)
    k = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts) + 1
    theta = l_ref[rep] + k * step[rep]
    frac = (theta - l_seg_a[rep]) / d[rep]
    times = t_a + frac * (t_b - t_a)
    return times, pix[rep]


def _simulate_flat(log_frames, timestamps, c_pos_map, c_neg_map):
    """Run the per-pixel threshold ladder over flattened log frames.

    Returns (t_float, pixel_index, polarity) arrays, unsorted.
    """
    n_pix = log_frames[0].size
    pix_ids = np.arange(n_pix, dtype=np.int64)
    l_ref = log_frames[0].copy()

    all_t, all_pix, all_p = [], [], []
    for i in range(len(log_frames) - 1):
        l_a = log_frames[i]
        l_b = log_frames[i + 1]
        t_a = float(timestamps[i])
        t_b = float(timestamps[i + 1])
        d = l_b - l_a

        rising = d > 0
        if rising.any():
            n = np.floor((l_b[rising] - l_ref[rising]) / c_pos_map[rising]).astype(np.int64)
            np.clip(n, 0, None, out=n)
            times, pix = _ladder_events(
                l_ref[rising],
                l_a[rising],
                d[rising],
                t_a,
                t_b,
                n,
                c_pos_map[rising],
                pix_ids[rising],
            )
            all_t.append(times)
            all_pix.append(pix)
            all_p.append(np.ones(len(times), dtype=np.int8))
            l_ref[rising] += n * c_pos_map[rising]

        falling = d < 0
        if falling.any():
            n = np.floor((l_ref[falling] - l_b[falling]) / c_neg_map[falling]).astype(np.int64)
            np.clip(n, 0, None, out=n)
            times, pix = _ladder_events(
                l_ref[falling],
                l_a[falling],
                d[falling],
                t_a,
                t_b,
                n,
                -c_neg_map[falling],
                pix_ids[falling],
            )
            all_t.append(times)
            all_pix.append(pix)
            all_p.append(-np.ones(len(times), dtype=np.int8))
            l_ref[falling] -= n * c_neg_map[falling]

    if not all_t:
        empty = np.empty(0)
        return empty, empty.astype(np.int64), empty.astype(np.int8)
    return np.concatenate(all_t), np.concatenate(all_pix), np.concatenate(all_p)


def simulate(frames: Sequence[Frame], config: SimulatorConfig = SimulatorConfig()) -> EventStream:
    """Simulate an event stream from >= 2 timestamped frames.

    The output window is [t_first, t_last] and events are in canonical order;
    the same inputs and seed always produce identical output.
    """
    if len(frames) < 2:
        raise ValueError("need at least 2 frames to simulate events")
    h, w = frames[0].pixels.shape[:2]
    for f in frames:
        if f.pixels.shape[:2] != (h, w):
            raise ValueError("all frames must share the same dimensions")
    timestamps = [f.t for f in frames]
    if any(b <= a for a, b in zip(timestamps, timestamps[1:])):
        raise ValueError("frame timestamps must be strictly increasing")

    log_frames = [log_intensity(f.pixels, config.log_eps).ravel() for f in frames]

    n_pix = h * w
    if config.jitter_std > 0:
        rng = np.random.default_rng(config.seed)
        c_pos_map = rng.normal(config.c_pos, config.jitter_std, n_pix)
        c_neg_map = rng.normal(config.c_neg, config.jitter_std, n_pix)
        np.clip(c_pos_map, _MIN_THRESHOLD, None, out=c_pos_map)
        np.clip(c_neg_map, _MIN_THRESHOLD, None, out=c_neg_map)
    else:
        c_pos_map = np.full(n_pix, config.c_pos, dtype=np.float64)
        c_neg_map = np.full(n_pix, config.c_neg, dtype=np.float64)

    t_float, pix, pol = _simulate_flat(log_frames, timestamps, c_pos_map, c_neg_map)
    t = np.rint(t_float).astype(np.int64)
    ys, xs = np.divmod(pix, w)
    order = canonical_order(t, xs, ys, pol)
    return EventStream(
        t[order],
        xs[order],
        ys[order],
        pol[order],
        (int(timestamps[0]), int(timestamps[-1])),
        w,
        h,
    )


def events_from_log_signal(timestamps, log_values, c_pos: float, c_neg: float):
    """Threshold crossings of a single-pixel piecewise-linear log signal.

    Takes the signal's sample times (integer microseconds) and log values at
    those times; returns (t, polarity) int arrays sorted by time. This is the
    same ladder the frame simulator runs, exposed for callers that already
    have log-domain data.
    """
    timestamps = [int(v) for v in timestamps]
    if len(timestamps) < 2 or len(timestamps) != len(log_values):
        raise ValueError("need matching lists of >= 2 timestamps and log values")
    if any(b <= a for a, b in zip(timestamps, timestamps[1:])):
        raise ValueError("timestamps must be strictly increasing")
    log_frames = [np.asarray([v], dtype=np.float64) for v in log_values]
    c_pos_map = np.asarray([c_pos], dtype=np.float64)
    c_neg_map = np.asarray([c_neg], dtype=np.float64)
    t_float, _, pol = _simulate_flat(log_frames, timestamps, c_pos_map, c_neg_map)
    t = np.rint(t_float).astype(np.int64)
    order = np.lexsort((pol, t))
    return t[order], pol[order].astype(np.int64)
