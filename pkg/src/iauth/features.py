"""Windowed time/frequency features and the fused 28-dimensional Auth vector.

Layout of ``AuthVector.values`` (index ranges are stable):

    0-15   time part:  phone acc, phone gyro, watch acc, watch gyro,
           each [mean, var, max, min] of the magnitude signal
    16-27  freq part:  same stream order, each [energy, freq, energy_fre]

``energy`` is the largest DFT bin (usually DC), ``freq`` the centre
frequency of the largest local-maximum bin outside the first peak and its
two neighbours, ``energy_fre`` that bin's amplitude. When no such second
peak exists both are 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .sensors import STREAM_KEYS, Device, PairedTrace, Sensor, SensorSample, SensorStream

TIME_FEATURES = ("mean", "var", "max", "min")
FREQ_FEATURES = ("energy", "freq", "energy_fre")
N_TIME = len(TIME_FEATURES) * len(STREAM_KEYS)
N_FREQ = len(FREQ_FEATURES) * len(STREAM_KEYS)
N_FEATURES = N_TIME + N_FREQ

FEATURE_NAMES: tuple[str, ...] = tuple(
    [f"{d.value}_{s.value}_{f}" for d, s in STREAM_KEYS for f in TIME_FEATURES]
    + [f"{d.value}_{s.value}_{f}" for d, s in STREAM_KEYS for f in FREQ_FEATURES]
)


def device_columns(devices: Iterable[Device]) -> np.ndarray:
    """Indices into the 28-vector belonging to the given devices."""
    wanted = set(devices)
    return np.array([i for i, name in enumerate(FEATURE_NAMES) if Device(name.split("_")[0]) in wanted])


PHONE_COLUMNS = device_columns([Device.PHONE])

# Candidate second peaks must exceed this fraction of the first peak; below it
# a bin is treated as round-off.
PEAK_FLOOR = 1e-9
PEAK_EXCLUSION = 1


def magnitude(sample: SensorSample) -> float:
    return float(np.sqrt(sample.x * sample.x + sample.y * sample.y + sample.z * sample.z))


def magnitudes(values: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean norm of an ``(n, 3)`` array."""
    return np.sqrt(np.einsum("ij,ij->i", values, values))


@dataclass(frozen=True, eq=False)
class Window:
    k: int
    device: Device
    sensor: Sensor
    magnitudes: np.ndarray
    rate: float

    def __post_init__(self):
        m = np.asarray(self.magnitudes, dtype=float).reshape(-1)
        if len(m) < 2:
            raise ValueError("a window needs at least 2 samples")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("window magnitudes must be finite and non-negative")
        object.__setattr__(self, "magnitudes", m)

    @property
    def n(self) -> int:
        return len(self.magnitudes)

    @property
    def window_size(self) -> float:
        return self.n / self.rate


@dataclass(frozen=True, eq=False)
class Spectrum:
    magnitudes: np.ndarray
    resolution: float

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(len(self.magnitudes)) * self.resolution


@dataclass(frozen=True, eq=False)
class AuthVector:
    k: int
    time_part: np.ndarray
    freq_part: np.ndarray
    label: int | None = None

    def __post_init__(self):
        tp = np.asarray(self.time_part, dtype=float).reshape(-1)
        fp = np.asarray(self.freq_part, dtype=float).reshape(-1)
        if tp.shape != (N_TIME,) or fp.shape != (N_FREQ,):
            raise ValueError(f"AuthVector parts must have {N_TIME} and {N_FREQ} entries")
        if not (np.all(np.isfinite(tp)) and np.all(np.isfinite(fp))):
            raise ValueError("AuthVector entries must be finite")
        if self.label not in (None, 1, -1):
            raise ValueError(f"label must be +1, -1 or None, got {self.label}")
        object.__setattr__(self, "time_part", tp)
        object.__setattr__(self, "freq_part", fp)

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.time_part, self.freq_part])

    def with_label(self, label: int) -> "AuthVector":
        return AuthVector(self.k, self.time_part, self.freq_part, label)


def window_length(window_size: float, rate: float) -> int:
    n = int(round(window_size * rate))
    if n < 2:
        raise ValueError(f"window of {window_size} s at {rate} Hz has fewer than 2 samples")
    return n


def segment_windows(stream: SensorStream, window_size: float) -> list[Window]:
    """Cut a uniform-rate stream into non-overlapping windows; the tail is dropped."""
    n = window_length(window_size, stream.rate)
    count = len(stream) // n
    if count == 0:
        raise ValueError("stream shorter than one window")
    mags = magnitudes(stream.values[: count * n]).reshape(count, n)
    return [Window(k, stream.device, stream.sensor, mags[k], stream.rate) for k in range(count)]


def time_features(w: Window) -> np.ndarray:
    s = w.magnitudes
    mean = s.mean()
    return np.array([mean, np.mean((s - mean) ** 2), s.max(), s.min()])


def spectrum(signal, rate: float) -> Spectrum:
    """One-sided, unnormalised DFT magnitude ``|X_j|``, j = 0..n//2, of any real signal."""
    s = np.asarray(signal, dtype=float).reshape(-1)
    return Spectrum(np.abs(np.fft.rfft(s)), rate / len(s))


def dft(w: Window) -> Spectrum:
    return spectrum(w.magnitudes, w.rate)


def freq_features(spec: Spectrum) -> np.ndarray:
    mag = spec.magnitudes
    if len(mag) < 3:
        raise ValueError("spectrum needs at least 3 bins")
    first = int(np.argmax(mag))
    energy = float(mag[first])

    left = np.concatenate([[-np.inf], mag[:-1]])
    right = np.concatenate([mag[1:], [-np.inf]])
    is_peak = (mag > left) & (mag >= right) & (mag > PEAK_FLOOR * energy)
    lo, hi = max(0, first - PEAK_EXCLUSION), first + PEAK_EXCLUSION + 1
    is_peak[lo:hi] = False
    if not is_peak.any():
        return np.array([energy, 0.0, 0.0])
    second = int(np.flatnonzero(is_peak)[np.argmax(mag[is_peak])])
    return np.array([energy, second * spec.resolution, float(mag[second])])


def _check_window(w: Window, device: Device, sensor: Sensor, name: str) -> None:
    if not isinstance(w, Window):
        raise TypeError(f"{name} must be a Window")
    if (w.device, w.sensor) != (device, sensor):
        raise ValueError(f"{name} expects a {device.value}/{sensor.value} window, got {w.device.value}/{w.sensor.value}")


def build_auth_vector(phone_acc: Window, phone_gyro: Window, watch_acc: Window, watch_gyro: Window,
                      k: int, label: int | None = None) -> AuthVector:
    windows = (phone_acc, phone_gyro, watch_acc, watch_gyro)
    for w, key, name in zip(windows, STREAM_KEYS, ("phone_acc", "phone_gyro", "watch_acc", "watch_gyro")):
        _check_window(w, *key, name)
    if any(w.k != k for w in windows):
        raise ValueError(f"window indices {[w.k for w in windows]} do not all equal {k}")
    if len({w.n for w in windows}) != 1:
        raise ValueError(f"window lengths differ: {[w.n for w in windows]}")
    time_part = np.concatenate([time_features(w) for w in windows])
    freq_part = np.concatenate([freq_features(dft(w)) for w in windows])
    return AuthVector(k, time_part, freq_part, label)


def extract_features(trace: PairedTrace, window_size: float = 6.0, label: int | None = None) -> list[AuthVector]:
    """AuthVectors for every complete window of a uniform-rate trace."""
    per_stream = [segment_windows(trace[key], window_size) for key in STREAM_KEYS]
    count = min(len(ws) for ws in per_stream)
    n_dur = int(np.floor(trace.duration / window_size + 1e-9))
    count = min(count, n_dur) if n_dur > 0 else 0
    if count == 0:
        raise ValueError(f"trace of {trace.duration:g} s has no complete {window_size:g} s window")
    return [build_auth_vector(*(ws[k] for ws in per_stream), k=k, label=label) for k in range(count)]


def feature_matrix(vectors: Sequence[AuthVector]) -> np.ndarray:
    if len(vectors) == 0:
        return np.empty((0, N_FEATURES))
    return np.vstack([v.values for v in vectors])


def write_feature_csv(vectors: Sequence[AuthVector], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["k", "label"] + [f"f{i}" for i in range(N_FEATURES)])
        for v in vectors:
            w.writerow([v.k, "" if v.label is None else v.label] + [repr(float(a)) for a in v.values])


def read_feature_csv(path) -> list[AuthVector]:
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:2] != ["k", "label"] or len(header) != N_FEATURES + 2:
            raise ValueError(f"{path}: not a feature dump")
        for row in reader:
            vals = np.array([float(a) for a in row[2:]])
            label = int(row[1]) if row[1] else None
            out.append(AuthVector(int(row[0]), vals[:N_TIME], vals[N_TIME:], label))
    return out
