"""Seeded harmonic-gait generator for labelled multi-user traces.

Each axis of each stream is

    bias + amplitude * sum_h w_h * sin(2 pi h f t + phase) + N(0, noise_std^2)

with ``f`` the stream's gait frequency and ``w_h`` the harmonic weights
(``w_1`` is the fundamental).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .sensors import DEFAULT_RATE, STREAM_KEYS, Device, PairedTrace, Sensor, SensorStream

GRAVITY = 9.81


def _triple(v) -> tuple[float, float, float]:
    t = tuple(float(a) for a in v)
    if len(t) != 3:
        raise ValueError(f"expected 3 components, got {len(t)}")
    return t  # type: ignore[return-value]


@dataclass(frozen=True)
class StreamProfile:
    gait_freq: float
    amplitude: tuple[float, float, float]
    harmonics: tuple[float, ...] = (1.0,)
    noise_std: float = 0.0
    bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    phase: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "amplitude", _triple(self.amplitude))
        object.__setattr__(self, "bias", _triple(self.bias))
        object.__setattr__(self, "phase", _triple(self.phase))
        object.__setattr__(self, "harmonics", tuple(float(w) for w in self.harmonics))
        if not (self.gait_freq > 0 and math.isfinite(self.gait_freq)):
            raise ValueError(f"gait frequency must be positive, got {self.gait_freq}")
        if not self.noise_std >= 0:
            raise ValueError(f"noise standard deviation must be >= 0, got {self.noise_std}")


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    streams: dict[tuple[Device, Sensor], StreamProfile]
    seed: int = 0

    def __post_init__(self):
        missing = [k for k in STREAM_KEYS if k not in self.streams]
        if missing:
            raise ValueError(f"profile {self.user_id!r} lacks streams {missing}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def check_rate(self, rate: float) -> None:
        for (dev, sen), sp in self.streams.items():
            if not sp.gait_freq < rate / 2:
                raise ValueError(
                    f"{dev.value}/{sen.value} gait frequency {sp.gait_freq} Hz violates Nyquist at {rate} Hz"
                )

    def with_seed(self, seed: int, user_id: str | None = None) -> "UserProfile":
        return replace(self, seed=seed, user_id=self.user_id if user_id is None else user_id)

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "seed": int(self.seed),
            "streams": {f"{d.value}/{s.value}": asdict(sp) for (d, s), sp in self.streams.items()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "UserProfile":
        streams = {}
        for name, sp in obj["streams"].items():
            dev, sen = name.split("/")
            spd = dict(sp)
            streams[(Device(dev), Sensor(sen))] = StreamProfile(
                gait_freq=spd.pop("gait_freq"), amplitude=spd.pop("amplitude"), **spd
            )
        return cls(user_id=str(obj["user_id"]), streams=streams, seed=int(obj.get("seed", 0)))


def load_profile(path) -> UserProfile:
    with open(path) as f:
        return UserProfile.from_dict(json.load(f))


def save_profile(profile: UserProfile, path) -> None:
    with open(path, "w") as f:
        json.dump(profile.to_dict(), f, indent=2)
        f.write("\n")


def _stream_values(sp: StreamProfile, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((len(t), 3))
    for a in range(3):
        wave = np.zeros_like(t)
        for h, w in enumerate(sp.harmonics, start=1):
            if w:
                wave += w * np.sin(2 * np.pi * h * sp.gait_freq * t + sp.phase[a])
        out[:, a] = sp.bias[a] + sp.amplitude[a] * wave
    if sp.noise_std > 0:
        out += rng.normal(0.0, sp.noise_std, size=out.shape)
    return out


def synthesize_user_trace(profile: UserProfile, duration: float, rate: float = DEFAULT_RATE) -> PairedTrace:
    """Generate a deterministic PairedTrace of ``duration`` seconds."""
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    profile.check_rate(rate)
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    streams = {}
    for idx, key in enumerate(STREAM_KEYS):
        rng = np.random.default_rng(np.random.SeedSequence([int(profile.seed), idx]))
        streams[key] = SensorStream(key[0], key[1], rate, t, _stream_values(profile.streams[key], t, rng))
    return PairedTrace(profile.user_id, streams)


def gait_profile(user_id: str, gait_freq: float, noise_std: float = 0.3, seed: int = 0,
                 watch_freq: float | None = None, watch_harmonics=(1.0, 0.3),
                 acc_amplitude=(0.6, 0.9, 2.0), gyro_amplitude=(0.8, 0.5, 0.4)) -> UserProfile:
    """A plausible walking profile: gravity on the accelerometer z axis.

    The watch swings at ``watch_freq`` (defaults to the phone's gait
    frequency) with its own harmonic mix.
    """
    wf = gait_freq if watch_freq is None else watch_freq
    acc_bias = (0.0, 0.0, GRAVITY)
    gyro_bias = (0.2, -0.1, 0.3)
    streams = {
        (Device.PHONE, Sensor.ACC): StreamProfile(gait_freq, acc_amplitude, (1.0, 0.25), noise_std, acc_bias),
        (Device.PHONE, Sensor.GYRO): StreamProfile(gait_freq, gyro_amplitude, (1.0,), noise_std, gyro_bias),
        (Device.WATCH, Sensor.ACC): StreamProfile(wf, acc_amplitude, tuple(watch_harmonics), noise_std, acc_bias),
        (Device.WATCH, Sensor.GYRO): StreamProfile(wf, gyro_amplitude, tuple(watch_harmonics), noise_std, gyro_bias),
    }
    return UserProfile(user_id, streams, seed)
