"""Event stream data model: ordering, windowing, grouping and time reversal.

An event is a tuple (t, x, y, p): timestamp in integer microseconds, pixel
column, pixel row, and polarity +1/-1. Streams keep their events in canonical
order, sorted by (t, y, x, p), which makes serialization byte-deterministic.

Two on-disk formats are supported:

* text  -- one ``t x y p`` line per event, ASCII, sorted.
* binary (EVT1) -- 24-byte header (magic ``EVT1``, sensor width u32,
  sensor height u32, reserved u32, t_begin u64), then packed 13-byte records
  (t u64, x u16, y u16, p i8), then a trailing u64 footer holding t_end.
  All integers little-endian; the record count is implied by the file length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

EVT1_MAGIC = b"EVT1"
_EVT1_HEADER = struct.Struct("<4sIIIQ")  # magic, width, height, reserved, t_begin
_EVT1_FOOTER = struct.Struct("<Q")  # t_end
_EVT1_RECORD_DTYPE = np.dtype(
    {
        "names": ["t", "x", "y", "p"],
        "formats": ["<u8", "<u2", "<u2", "i1"],
        "offsets": [0, 8, 10, 12],
        "itemsize": 13,
    }
)


@dataclass(frozen=True)
class Event:
    """Single brightness-change report."""

    t: int
    x: int
    y: int
    polarity: int


def canonical_order(t, x, y, p):
    """Index array sorting events by (t, y, x, polarity) ascending."""
    return np.lexsort((p, x, y, t))


@dataclass(frozen=True, eq=False)
class EventStream:
    """Immutable, canonically sorted events within a closed time window.

    Arrays are parallel: ``t`` (int64 microseconds), ``x``/``y`` (int64 pixel
    indices), ``p`` (int8 polarity, +1 or -1). ``window`` is the closed
    interval [t_begin, t_end] that every event timestamp lies in.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    window: tuple[int, int]
    sensor_width: int
    sensor_height: int

    def __post_init__(self):
        t0, t1 = self.window
        if t0 > t1:
            raise ValueError(f"window must satisfy t_begin <= t_end, got {self.window}")
        if self.sensor_width <= 0 or self.sensor_height <= 0:
            raise ValueError("sensor dimensions must be positive")
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event arrays must have equal length")
        if n == 0:
            return
        if self.t.min() < t0 or self.t.max() > t1:
            raise ValueError("event timestamps fall outside the stream window")
        if self.x.min() < 0 or self.x.max() >= self.sensor_width:
            raise ValueError("event x outside sensor")
        if self.y.min() < 0 or self.y.max() >= self.sensor_height:
            raise ValueError("event y outside sensor")
        if not np.all(np.abs(self.p) == 1):
            raise ValueError("polarity must be +1 or -1")
        if _out_of_canonical_order(self.t, self.x, self.y, self.p):
            raise ValueError("events are not in canonical (t, y, x, p) order")

    @classmethod
    def from_arrays(cls, t, x, y, p, window, sensor_width, sensor_height, *, sort=True):
        """Build a stream from raw arrays, sorting into canonical order."""
        t = np.asarray(t, dtype=np.int64)
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        p = np.asarray(p, dtype=np.int8)
        if sort and len(t):
            order = canonical_order(t, x, y, p)
            t, x, y, p = t[order], x[order], y[order], p[order]
        return cls(t, x, y, p, (int(window[0]), int(window[1])), int(sensor_width), int(sensor_height))

    @classmethod
    def from_events(cls, events, window, sensor_width, sensor_height):
        t = [e.t for e in events]
        x = [e.x for e in events]
        y = [e.y for e in events]
        p = [e.polarity for e in events]
        return cls.from_arrays(t, x, y, p, window, sensor_width, sensor_height)

    @classmethod
    def empty(cls, window, sensor_width, sensor_height):
        return cls.from_arrays([], [], [], [], window, sensor_width, sensor_height)

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        for i in range(len(self.t)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def same_events(self, other: "EventStream") -> bool:
        """Equality of event content, window and sensor geometry."""
        return (
            self.window == other.window
            and self.sensor_width == other.sensor_width
            and self.sensor_height == other.sensor_height
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )


def _out_of_canonical_order(t, x, y, p):
    """True if some adjacent event pair violates (t, y, x, p) ordering."""
    if len(t) < 2:
        return False
    gt = np.zeros(len(t) - 1, dtype=bool)  # decided: next > prev so far
    lt = np.zeros(len(t) - 1, dtype=bool)  # decided: next < prev so far
    for key in (t, y, x, p):
        prev, nxt = key[:-1], key[1:]
        undecided = ~(gt | lt)
        gt |= undecided & (nxt > prev)
        lt |= undecided & (nxt < prev)
    return bool(lt.any())


def slice_stream(stream: EventStream, a: int, b: int) -> EventStream:
    """Events with a <= t <= b as a new stream with window [a, b].

    Raises ValueError when [a, b] is not contained in the stream window.
    """
    t0, t1 = stream.window
    if not (t0 <= a <= b <= t1):
        raise ValueError(f"slice range [{a}, {b}] outside stream window [{t0}, {t1}]")
    lo = np.searchsorted(stream.t, a, side="left")
    hi = np.searchsorted(stream.t, b, side="right")
    return EventStream(
        stream.t[lo:hi].copy(),
        stream.x[lo:hi].copy(),
        stream.y[lo:hi].copy(),
        stream.p[lo:hi].copy(),
        (int(a), int(b)),
        stream.sensor_width,
        stream.sensor_height,
    )


def reverse_stream(stream: EventStream) -> EventStream:
    """Time-reverse a stream within its window.

    Each event (t, x, y, p) maps to (t_begin + t_end - t, x, y, -p): played
    backwards, a brightness increase becomes a decrease. The window is
    unchanged and the result is re-sorted into canonical order.
    """
    t0, t1 = stream.window
    return EventStream.from_arrays(
        t0 + t1 - stream.t,
        stream.x,
        stream.y,
        -stream.p.astype(np.int64),
        stream.window,
        stream.sensor_width,
        stream.sensor_height,
    )


def group_between_frames(stream: EventStream, frame_timestamps) -> list[EventStream]:
    """Split a stream into the N-1 inter-frame groups of N frame timestamps.

    Group i covers [ts_i, ts_{i+1}]. An event exactly at an interior boundary
    belongs to the earlier group only, so the groups partition the events in
    [ts_0, ts_{N-1}] with no double counting.
    """
    ts = [int(v) for v in frame_timestamps]
    if len(ts) < 2:
        raise ValueError("need at least 2 frame timestamps to form groups")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("frame timestamps must be strictly increasing")
    t0, t1 = stream.window
    if ts[0] < t0 or ts[-1] > t1:
        raise ValueError("frame timestamps must lie within the stream window")

    groups = []
    for i in range(len(ts) - 1):
        side = "left" if i == 0 else "right"
        lo = np.searchsorted(stream.t, ts[i], side=side)
        hi = np.searchsorted(stream.t, ts[i + 1], side="right")
        groups.append(
            EventStream(
                stream.t[lo:hi].copy(),
                stream.x[lo:hi].copy(),
                stream.y[lo:hi].copy(),
                stream.p[lo:hi].copy(),
                (ts[i], ts[i + 1]),
                stream.sensor_width,
                stream.sensor_height,
            )
        )
    return groups


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def write_text(stream: EventStream, path) -> None:
    """Write one ``t x y p`` line per event."""
    with open(path, "w") as f:
        for i in range(len(stream)):
            f.write(f"{stream.t[i]} {stream.x[i]} {stream.y[i]} {stream.p[i]}\n")


def read_text(path, sensor_width: int, sensor_height: int, window=None) -> EventStream:
    """Read the text event format, validating timestamp monotonicity.

    The text format carries no header, so sensor dimensions must be supplied;
    the window defaults to the span of the event timestamps.
    """
    t, x, y, p = [], [], [], []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 't x y p'")
            ti, xi, yi, pi = (int(v) for v in parts)
            if pi not in (1, -1):
                raise FormatError(f"{path}:{lineno}: polarity must be 1 or -1")
            if t and ti < t[-1]:
                raise FormatError(f"{path}:{lineno}: timestamps not monotonic")
            t.append(ti)
            x.append(xi)
            y.append(yi)
            p.append(pi)
    if window is None:
        window = (t[0], t[-1]) if t else (0, 0)
    return EventStream.from_arrays(t, x, y, p, window, sensor_width, sensor_height)


def write_binary(stream: EventStream, path) -> None:
    """Write the EVT1 binary format."""
    t0, t1 = stream.window
    if t0 < 0:
        raise FormatError("EVT1 stores unsigned timestamps; window must be non-negative")
    records = np.zeros(len(stream), dtype=_EVT1_RECORD_DTYPE)
    records["t"] = stream.t
    records["x"] = stream.x
    records["y"] = stream.y
    records["p"] = stream.p
    with open(path, "wb") as f:
        f.write(_EVT1_HEADER.pack(EVT1_MAGIC, stream.sensor_width, stream.sensor_height, 0, t0))
        f.write(records.tobytes())
        f.write(_EVT1_FOOTER.pack(t1))


def read_binary(path) -> EventStream:
    """Read the EVT1 binary format, validating magic and monotonicity."""
    data = Path(path).read_bytes()
    if len(data) < _EVT1_HEADER.size + _EVT1_FOOTER.size:
        raise FormatError(f"{path}: truncated EVT1 file")
    magic, width, height, _, t_begin = _EVT1_HEADER.unpack_from(data, 0)
    if magic != EVT1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    body = data[_EVT1_HEADER.size : -_EVT1_FOOTER.size]
    if len(body) % _EVT1_RECORD_DTYPE.itemsize:
        raise FormatError(f"{path}: record section length not a multiple of record size")
    (t_end,) = _EVT1_FOOTER.unpack_from(data, len(data) - _EVT1_FOOTER.size)
    records = np.frombuffer(body, dtype=_EVT1_RECORD_DTYPE)
    t = records["t"].astype(np.int64)
    if len(t) and np.any(np.diff(t) < 0):
        raise FormatError(f"{path}: timestamps not monotonic")
    return EventStream.from_arrays(
        t, records["x"], records["y"], records["p"], (t_begin, t_end), width, height
    )
