"""Synchronized event+frame dataset ingestion and skip-benchmark planning.

Sequence layout on disk::

    <seq>/images/%06d.png      8-bit RGB frames
    <seq>/timestamps.txt       one integer microsecond timestamp per line
    <seq>/events.evt1          EVT1 event recording covering the frame span
    <seq>/homography.txt       optional, 9 whitespace-separated reals row-major
    <seq>/flow.flo             optional, forward flow per frame interval
    <seq>/meta.txt             optional key=value lines (split, description)

Frame timestamps for hardware-triggered recordings come from exposure
start/end trigger pairs; we timestamp each frame at the midpoint of its
exposure interval. When a homography is present it maps event coordinates
into the frame camera; converters from vendor formats are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TriggerCountError, TriggerFormatError
from .events import EventStream, canonical_order, read_binary, reverse_stream, slice_stream

EDGE_START = "start"
EDGE_END = "end"
_EDGE_CODES = {"S": EDGE_START, "E": EDGE_END}


@dataclass(frozen=True)
class TriggerRecord:
    """Hardware trigger: exposure start or end at time t (microseconds)."""

    t: int
    edge: str


def parse_trigger_file(path) -> list[TriggerRecord]:
    """Read ``t edge`` lines with edge in {S, E}."""
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2 or parts[1] not in _EDGE_CODES:
                raise TriggerFormatError(f"{path}:{lineno}: expected 't S|E'")
            records.append(TriggerRecord(int(parts[0]), _EDGE_CODES[parts[1]]))
    return records


def assign_frame_timestamps(triggers, frame_count: int) -> list[int]:
    """Midpoint-of-exposure timestamp for each trigger pair.

    Triggers must strictly alternate start/end with increasing times and
    contain exactly ``frame_count`` pairs.
    """
    triggers = list(triggers)
    if len(triggers) % 2 != 0:
        raise TriggerFormatError("trigger list has an unpaired record")
    for i, rec in enumerate(triggers):
        expected = EDGE_START if i % 2 == 0 else EDGE_END
        if rec.edge != expected:
            raise TriggerFormatError(f"trigger {i} should be an exposure {expected}")
    times = [rec.t for rec in triggers]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise TriggerFormatError("trigger timestamps must be strictly increasing")
    n_pairs = len(triggers) // 2
    if n_pairs != frame_count:
        raise TriggerCountError(f"{n_pairs} trigger pairs for {frame_count} frames")
    return [(triggers[2 * i].t + triggers[2 * i + 1].t + 1) // 2 for i in range(n_pairs)]


def load_homography(path) -> np.ndarray:
    values = [float(v) for v in Path(path).read_text().split()]
    if len(values) != 9:
        raise ValueError(f"{path}: homography file must hold 9 values")
    return np.array(values, dtype=np.float64).reshape(3, 3)


def apply_homography(stream: EventStream, h: np.ndarray, target_dims) -> EventStream:
    """Remap event coordinates through a 3x3 homography.

    Coordinates go through the perspective divide and round to the nearest
    integer pixel; events landing outside ``target_dims`` (width, height) are
    dropped. Timestamps and polarities are untouched and the result is
    re-sorted into canonical order.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (3, 3):
        raise ValueError("homography must be a 3x3 matrix")
    if abs(np.linalg.det(h)) <= 1e-12:
        raise ValueError("homography is singular")
    width, height = int(target_dims[0]), int(target_dims[1])

    ones = np.ones(len(stream), dtype=np.float64)
    pts = np.stack([stream.x.astype(np.float64), stream.y.astype(np.float64), ones])
    mapped = h @ pts
    wcoord = mapped[2]
    finite = np.abs(wcoord) > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = np.rint(mapped[0] / wcoord).astype(np.int64, copy=False)
        ys = np.rint(mapped[1] / wcoord).astype(np.int64, copy=False)
    keep = finite & (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height)

    t = stream.t[keep]
    x = xs[keep]
    y = ys[keep]
    p = stream.p[keep]
    order = canonical_order(t, x, y, p)
    return EventStream(t[order], x[order], y[order], p[order], stream.window, width, height)


@dataclass(frozen=True)
class SequenceManifest:
    """One recorded sequence: frames, their timestamps and an event file."""

    name: str
    frames_dir: Path
    frame_timestamps: list[int]
    event_file: Path
    homography_file: Path | None = None
    flow_file: Path | None = None
    split: str = "test"

    def __post_init__(self):
        ts = self.frame_timestamps
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"{self.name}: frame timestamps must be strictly increasing")
        frames = self.frame_paths()
        if len(frames) != len(ts):
            raise ValueError(
                f"{self.name}: {len(frames)} frames but {len(ts)} timestamps"
            )

    def frame_paths(self) -> list[Path]:
        return sorted(self.frames_dir.glob("*.png"))


def _read_meta(path: Path) -> dict[str, str]:
    meta = {}
    if path.exists():
        for line in path.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def load_sequence(seq_dir) -> SequenceManifest:
    """Build a manifest from the on-disk sequence layout."""
    seq_dir = Path(seq_dir)
    ts_file = seq_dir / "timestamps.txt"
    timestamps = [int(line) for line in ts_file.read_text().split()]
    homography = seq_dir / "homography.txt"
    flow = seq_dir / "flow.flo"
    meta = _read_meta(seq_dir / "meta.txt")
    return SequenceManifest(
        name=seq_dir.name,
        frames_dir=seq_dir / "images",
        frame_timestamps=timestamps,
        event_file=seq_dir / "events.evt1",
        homography_file=homography if homography.exists() else None,
        flow_file=flow if flow.exists() else None,
        split=meta.get("split", "test"),
    )


def discover_sequences(dataset_root, split: str | None = None) -> list[SequenceManifest]:
    """All sequences under a dataset root, sorted by name."""
    root = Path(dataset_root)
    manifests = []
    for seq_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if not (seq_dir / "timestamps.txt").exists():
            continue
        manifest = load_sequence(seq_dir)
        if split is None or manifest.split == split:
            manifests.append(manifest)
    return manifests


def load_sequence_events(manifest: SequenceManifest, frame_dims=None) -> EventStream:
    """Load a sequence's events, applying its homography when present."""
    stream = read_binary(manifest.event_file)
    if manifest.homography_file is not None:
        h = load_homography(manifest.homography_file)
        if frame_dims is None:
            frame_dims = (stream.sensor_width, stream.sensor_height)
        stream = apply_homography(stream, h, frame_dims)
    return stream


@dataclass(frozen=True)
class TargetSpec:
    """One frame to reconstruct inside a job."""

    frame_index: int
    skip_position: int
    t: int
    tau: float
    events_left: EventStream  # keyframe_left -> target
    events_right: EventStream  # target -> keyframe_right
    events_reversed: EventStream  # target -> keyframe_left (time-reversed left window)
    gt_frame: Path


@dataclass(frozen=True)
class InterpolationJob:
    """Unit of benchmark work: a keyframe pair plus its hidden ground truth."""

    job_id: int
    sequence: str
    left_index: int
    right_index: int
    left_frame: Path
    right_frame: Path
    t_left: int
    t_right: int
    targets: list[TargetSpec]
    flow_file: Path | None = None


def make_skip_benchmark(
    manifest: SequenceManifest, skip: int, events: EventStream | None = None
) -> list[InterpolationJob]:
    """Plan skip-N jobs: keep every (skip+1)-th frame, reconstruct the rest.

    Keyframes are frames 0, skip+1, 2(skip+1), ...; each job carries the
    skipped frames' timestamps, their event windows (left, right, and the
    time-reversed left window) and the ground-truth paths. Trailing frames
    that do not complete a group are dropped.
    """
    if skip < 1:
        raise ValueError("skip must be >= 1")
    ts = manifest.frame_timestamps
    n = len(ts)
    if n < skip + 2:
        raise ValueError(f"sequence {manifest.name} too short for skip={skip}")
    if events is None:
        events = load_sequence_events(manifest)
    frames = manifest.frame_paths()

    jobs = []
    job_id = 0
    step = skip + 1
    for left in range(0, n - step, step):
        right = left + step
        t_left, t_right = ts[left], ts[right]
        targets = []
        for pos in range(1, skip + 1):
            idx = left + pos
            t_target = ts[idx]
            ev_left = slice_stream(events, t_left, t_target)
            ev_right = slice_stream(events, t_target, t_right)
            targets.append(
                TargetSpec(
                    frame_index=idx,
                    skip_position=pos,
                    t=t_target,
                    tau=(t_target - t_left) / (t_right - t_left),
                    events_left=ev_left,
                    events_right=ev_right,
                    events_reversed=reverse_stream(ev_left),
                    gt_frame=frames[idx],
                )
            )
        jobs.append(
            InterpolationJob(
                job_id=job_id,
                sequence=manifest.name,
                left_index=left,
                right_index=right,
                left_frame=frames[left],
                right_frame=frames[right],
                t_left=t_left,
                t_right=t_right,
                targets=targets,
                flow_file=manifest.flow_file,
            )
        )
        job_id += 1
    return jobs
