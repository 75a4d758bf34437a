"""Sensor data model, trace I/O, resampling and device alignment.

Streams are stored column-wise (a timestamp vector plus an ``(n, 3)`` value
array) rather than as lists of :class:`SensorSample` objects; ``stream[i]``
still hands back a sample when one is needed.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

import numpy as np

DEFAULT_RATE = 50.0


class TraceFormatError(ValueError):
    """Raised when a trace file cannot be turned into a valid PairedTrace."""


class Device(enum.Enum):
    PHONE = "phone"
    WATCH = "watch"


class Sensor(enum.Enum):
    ACC = "acc"
    GYRO = "gyro"


# The fixed stream order used everywhere (feature layout, CSV output, seeding).
STREAM_KEYS: tuple[tuple[Device, Sensor], ...] = (
    (Device.PHONE, Sensor.ACC),
    (Device.PHONE, Sensor.GYRO),
    (Device.WATCH, Sensor.ACC),
    (Device.WATCH, Sensor.GYRO),
)

_LONG_NAMES = {
    Device.PHONE: "Phone",
    Device.WATCH: "Watch",
    Sensor.ACC: "Accelerometer",
    Sensor.GYRO: "Gyroscope",
}


def stream_label(device: Device, sensor: Sensor) -> str:
    return f"{_LONG_NAMES[device]}/{_LONG_NAMES[sensor]}"


@dataclass(frozen=True)
class SensorSample:
    timestamp: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"timestamp must be finite and non-negative, got {self.timestamp}")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError("sample values must be finite")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SensorStream:
    """One sensor on one device: strictly increasing timestamps and xyz values."""

    device: Device
    sensor: Sensor
    rate: float
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _frozen(self.timestamps).reshape(-1)
        v = _frozen(self.values).reshape(-1, 3) if np.size(self.values) else _frozen(np.empty((0, 3)))
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive, got {self.rate}")
        if len(t) != len(v):
            raise ValueError("timestamps and values differ in length")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ValueError("stream contains non-finite values")
        if len(t) and t[0] < 0:
            raise ValueError("timestamps must be non-negative")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError(f"{self.label}: timestamps not strictly increasing")

    @property
    def label(self) -> str:
        return stream_label(self.device, self.sensor)

    @property
    def key(self) -> tuple[Device, Sensor]:
        return (self.device, self.sensor)

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> SensorSample:
        x, y, z = self.values[i]
        return SensorSample(float(self.timestamps[i]), float(x), float(y), float(z))

    @property
    def start(self) -> float:
        return float(self.timestamps[0])

    @property
    def end(self) -> float:
        """End of coverage: each sample is taken to cover one nominal period."""
        return float(self.timestamps[-1]) + 1.0 / self.rate

    def __eq__(self, other):
        if not isinstance(other, SensorStream):
            return NotImplemented
        return (
            self.key == other.key
            and self.rate == other.rate
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class PairedTrace:
    """Phone and watch accelerometer/gyroscope streams for one user."""

    user_id: str
    streams: Mapping[tuple[Device, Sensor], SensorStream]
    duration: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        streams = dict(self.streams)
        for key in STREAM_KEYS:
            if key not in streams:
                raise TraceFormatError(f"missing stream {stream_label(*key)}")
            if streams[key].key != key:
                raise ValueError(f"stream stored under {stream_label(*key)} is {streams[key].label}")
            if len(streams[key]) == 0:
                raise TraceFormatError(f"stream {stream_label(*key)} is empty")
        if len(streams) != len(STREAM_KEYS):
            raise ValueError("unexpected extra streams")
        object.__setattr__(self, "streams", {k: streams[k] for k in STREAM_KEYS})
        common = self.common_span()
        if self.duration is None:
            object.__setattr__(self, "duration", common)
        elif self.duration > common + 1e-9:
            raise ValueError(f"duration {self.duration} exceeds common coverage {common}")

    def __getitem__(self, key: tuple[Device, Sensor]) -> SensorStream:
        return self.streams[key]

    def common_span(self) -> float:
        start = max(s.start for s in self.streams.values())
        end = min(s.end for s in self.streams.values())
        return max(0.0, end - start)

    def __eq__(self, other):
        if not isinstance(other, PairedTrace):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.duration == other.duration
            and all(self.streams[k] == other.streams[k] for k in STREAM_KEYS)
        )


# --------------------------------------------------------------------------
# Serialization

CSV_HEADER = ("device", "sensor", "timestamp", "x", "y", "z")


def _fmt_time(t: float) -> str:
    s = f"{t:.6f}"
    return s if float(s) == t else repr(float(t))


def serialize_trace(trace: PairedTrace, fmt: str = "csv") -> str:
    """Render a trace in the CSV (default) or JSONL trace schema."""
    out = io.StringIO()
    if fmt == "csv":
        out.write(",".join(CSV_HEADER) + "\n")
    elif fmt != "jsonl":
        raise ValueError(f"unknown trace format {fmt!r}")
    for key in STREAM_KEYS:
        s = trace.streams[key]
        dev, sen = key[0].value, key[1].value
        for t, (x, y, z) in zip(s.timestamps.tolist(), s.values.tolist()):
            if fmt == "csv":
                out.write(f"{dev},{sen},{_fmt_time(t)},{x!r},{y!r},{z!r}\n")
            else:
                out.write(json.dumps({"device": dev, "sensor": sen, "timestamp": t,
                                      "x": x, "y": y, "z": z}) + "\n")
    return out.getvalue()


def write_trace(trace: PairedTrace, path, fmt: str | None = None) -> None:
    fmt = fmt or ("jsonl" if str(path).endswith(".jsonl") else "csv")
    with open(path, "w", newline="") as f:
        f.write(serialize_trace(trace, fmt))


def _rows_csv(text: Iterable[str]):
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError("empty trace file") from None
    if tuple(h.strip().lower() for h in header) != CSV_HEADER:
        raise TraceFormatError(f"line 1: expected header {','.join(CSV_HEADER)}")
    for row in reader:
        if not row:
            continue
        yield reader.line_num, row


def _rows_jsonl(text: Iterable[str]):
    for lineno, line in enumerate(text, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            yield lineno, [obj[c] for c in CSV_HEADER]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise TraceFormatError(f"line {lineno}: malformed row ({exc})") from None


def parse_trace(source: IO[str] | IO[bytes] | str, fmt: str = "csv", user_id: str = "",
                rate: float | None = None) -> PairedTrace:
    """Parse a trace file (CSV or JSONL schema) into a PairedTrace.

    ``rate`` is the nominal sampling rate; when omitted it is inferred per
    stream from the median timestamp spacing.
    """
    if isinstance(source, str):
        text: Iterable[str] = io.StringIO(source)
    else:
        data = source.read()
        text = io.StringIO(data.decode() if isinstance(data, bytes) else data)
    if fmt == "csv":
        rows = _rows_csv(text)
    elif fmt == "jsonl":
        rows = _rows_jsonl(text)
    else:
        raise ValueError(f"unknown trace format {fmt!r}")

    devices = {d.value: d for d in Device}
    sensors = {s.value: s for s in Sensor}
    cols: dict[tuple[Device, Sensor], list[list[float]]] = {}
    for lineno, row in rows:
        if len(row) != 6:
            raise TraceFormatError(f"line {lineno}: expected 6 fields, got {len(row)}")
        dev = devices.get(str(row[0]).strip().lower())
        sen = sensors.get(str(row[1]).strip().lower())
        if dev is None or sen is None:
            raise TraceFormatError(f"line {lineno}: unknown device/sensor {row[0]!r}/{row[1]!r}")
        try:
            vals = [float(v) for v in row[2:]]
        except (TypeError, ValueError):
            raise TraceFormatError(f"line {lineno}: non-numeric value") from None
        if not all(math.isfinite(v) for v in vals):
            raise TraceFormatError(f"line {lineno}: non-finite value")
        if vals[0] < 0:
            raise TraceFormatError(f"line {lineno}: negative timestamp")
        rows_for = cols.setdefault((dev, sen), [])
        if rows_for and vals[0] <= rows_for[-1][0]:
            raise TraceFormatError(f"line {lineno}: non-monotonic timestamp for {stream_label(dev, sen)}")
        rows_for.append(vals)

    streams = {}
    for key in STREAM_KEYS:
        if key not in cols:
            raise TraceFormatError(f"missing stream {stream_label(*key)}")
        arr = np.asarray(cols[key], dtype=float)
        r = rate if rate is not None else _infer_rate(arr[:, 0])
        streams[key] = SensorStream(key[0], key[1], r, arr[:, 0], arr[:, 1:])
    return PairedTrace(user_id, streams)


def _infer_rate(t: np.ndarray) -> float:
    if len(t) < 2:
        return DEFAULT_RATE
    # 9 significant digits absorbs the round-off in decimal timestamps
    return float(f"{1.0 / np.median(np.diff(t)):.9g}")


def read_trace(path, user_id: str | None = None, rate: float | None = None) -> PairedTrace:
    fmt = "jsonl" if str(path).endswith(".jsonl") else "csv"
    if user_id is None:
        from pathlib import Path
        user_id = Path(path).stem
    with open(path, newline="") as f:
        return parse_trace(f, fmt, user_id=user_id, rate=rate)


# --------------------------------------------------------------------------
# Resampling and alignment

def resample(stream: SensorStream, target_rate: float, origin: float | None = None) -> SensorStream:
    """Linearly interpolate ``stream`` onto a uniform grid at ``target_rate``.

    The grid starts at ``origin`` (default: the first timestamp) and runs up
    to the last timestamp. Grid points before the first sample take its value.
    """
    if len(stream) < 2:
        raise ValueError("resample needs at least 2 samples")
    if not target_rate > 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    t = stream.timestamps
    t0 = t[0] if origin is None else origin
    span = t[-1] - t0
    n = int(math.floor(span * target_rate + 1e-9)) + 1
    grid = t0 + np.arange(n) / target_rate
    grid = grid[grid <= t[-1] + 1e-12]
    values = np.column_stack([np.interp(grid, t, stream.values[:, a]) for a in range(3)])
    return SensorStream(stream.device, stream.sensor, target_rate, grid, values)


def _crop(stream: SensorStream, start: float, end: float) -> SensorStream:
    t = stream.timestamps
    keep = (t >= start - 1e-9) & (t < end - 1e-9)
    shifted = np.maximum(t[keep] - start, 0.0)
    return SensorStream(stream.device, stream.sensor, stream.rate, shifted, stream.values[keep])


def align_devices(phone: Iterable[SensorStream], watch: Iterable[SensorStream],
                  max_skew: float = 5.0, min_duration: float = 0.0,
                  user_id: str = "") -> PairedTrace:
    """Crop phone and watch streams to their common interval, zero-based.

    The skew is the spread of stream start times; it must not exceed
    ``max_skew``. ``min_duration`` is typically one window length.
    """
    streams = list(phone) + list(watch)
    if not streams or any(len(s) == 0 for s in streams):
        raise ValueError("align_devices needs nonempty phone and watch streams")
    start = max(s.start for s in streams)
    end = min(s.end for s in streams)
    if end <= start:
        raise ValueError("empty intersection")
    skew = start - min(s.start for s in streams)
    if skew > max_skew:
        raise ValueError(f"device skew {skew:.6f} s exceeds max_skew {max_skew} s")
    if end - start < min_duration:
        raise ValueError(f"common interval {end - start:.6f} s shorter than {min_duration} s")
    cropped = {s.key: _crop(s, start, end) for s in streams}
    return PairedTrace(user_id, cropped)


def uniform_trace(trace: PairedTrace, rate: float = DEFAULT_RATE, max_skew: float = 5.0) -> PairedTrace:
    """Align and resample every stream of ``trace`` onto a common ``rate`` grid.

    Streams that are already uniform at ``rate`` with a shared origin pass
    through unchanged.
    """
    if _is_uniform(trace, rate):
        return trace
    aligned = align_devices(
        [trace[k] for k in STREAM_KEYS if k[0] is Device.PHONE],
        [trace[k] for k in STREAM_KEYS if k[0] is Device.WATCH],
        max_skew=max_skew, user_id=trace.user_id,
    )
    streams = {k: resample(s, rate, origin=0.0) for k, s in aligned.streams.items()}
    n = min(len(s) for s in streams.values())
    streams = {k: SensorStream(k[0], k[1], rate, s.timestamps[:n], s.values[:n]) for k, s in streams.items()}
    return PairedTrace(trace.user_id, streams)


def _is_uniform(trace: PairedTrace, rate: float) -> bool:
    lengths = {len(s) for s in trace.streams.values()}
    if len(lengths) != 1:
        return False
    n = lengths.pop()
    expected = np.arange(n) / rate
    return all(s.rate == rate and np.allclose(s.timestamps, expected, atol=1e-9, rtol=0)
               for s in trace.streams.values())
