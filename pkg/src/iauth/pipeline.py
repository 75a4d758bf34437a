"""Enrollment and continuous-authentication session logic."""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import krr
from .features import N_FEATURES, AuthVector, extract_features
from .sensors import PairedTrace

log = logging.getLogger(__name__)

DEFAULT_TARGET = 800
DEFAULT_TOLERANCE = 0.1


class Phase(enum.Enum):
    COLLECTING = "collecting"
    READY = "ready"


def mean_shift(X: np.ndarray) -> float:
    """RMS per-feature shift between the buffer halves, in pooled-std units."""
    X = np.asarray(X, dtype=float)
    half = len(X) // 2
    if half == 0:
        return float("inf")
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    shift = (X[half:].mean(axis=0) - X[:half].mean(axis=0)) / scale
    return float(np.sqrt(np.mean(shift**2)))


@dataclass(frozen=True)
class EnrollmentState:
    """Rolling buffer of the newest ``target`` enrollment vectors."""

    collected: tuple[AuthVector, ...] = ()
    history: tuple[float, ...] = ()
    phase: Phase = Phase.COLLECTING
    target: int = DEFAULT_TARGET
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def count(self) -> int:
        return len(self.collected)

    def matrix(self) -> np.ndarray:
        return np.vstack([v.values for v in self.collected])


def enroll_step(state: EnrollmentState, v: AuthVector) -> EnrollmentState:
    if v.values.shape != (N_FEATURES,):
        raise ValueError(f"expected a {N_FEATURES}-dimensional vector")
    if v.label not in (None, 1):
        raise ValueError("enrollment vectors must belong to the legitimate user")
    collected = (state.collected + (v,))[-state.target:]
    history = state.history
    phase = Phase.COLLECTING
    if len(collected) >= state.target:
        stat = mean_shift(np.vstack([c.values for c in collected]))
        history = history + (stat,)
        if stat < state.tolerance:
            phase = Phase.READY
    return replace(state, collected=collected, history=history, phase=phase)


def enroll(vectors: Sequence[AuthVector], target: int = DEFAULT_TARGET,
           tolerance: float = DEFAULT_TOLERANCE) -> EnrollmentState:
    """Feed vectors until Ready (or the input runs out)."""
    state = EnrollmentState(target=target, tolerance=tolerance)
    for v in vectors:
        state = enroll_step(state, v)
        if state.phase is Phase.READY:
            break
    return state


@dataclass(frozen=True)
class Decision:
    k: int
    score: float
    label: int
    timestamp: float


class ResponseMode(enum.Enum):
    LOCK = "lock"
    DENY_ACCESS = "deny_access"
    LOG = "log"


@dataclass(frozen=True)
class SessionPolicy:
    consecutive_rejects_to_lock: int = 1
    mode: ResponseMode = ResponseMode.LOCK

    def __post_init__(self):
        if int(self.consecutive_rejects_to_lock) < 1:
            raise ValueError("consecutive_rejects_to_lock must be >= 1")


@dataclass(frozen=True)
class ResponseEvent:
    t: float
    event: str
    reason: str
    k: int


def _log_sink(ev: ResponseEvent) -> None:
    log.warning("%s at t=%.3f s: %s", ev.event, ev.t, ev.reason)


@dataclass
class SessionResult:
    decisions: list[Decision]
    events: list[ResponseEvent]
    window_size: float

    @property
    def deauthenticated(self) -> bool:
        return bool(self.events)

    @property
    def time_to_response(self) -> float | None:
        return self.events[0].t if self.events else None

    @property
    def first_response_window(self) -> int | None:
        return self.events[0].k if self.events else None

    def to_jsonl(self) -> str:
        lines = [json.dumps({"k": d.k, "t_start": d.k * self.window_size, "score": d.score, "label": d.label})
                 for d in self.decisions]
        lines += [json.dumps({"t": e.t, "event": e.event, "reason": e.reason}) for e in self.events]
        return "".join(line + "\n" for line in lines)


def authenticate_window(model: krr.KrrModel, v: AuthVector, window_size: float = 6.0) -> Decision:
    s = krr.score(model, v.values)
    return Decision(v.k, s, int(krr.decide(s, model.threshold)), (v.k + 1) * window_size)


def _decisions(model: krr.KrrModel, vectors: Sequence[AuthVector], window_size: float) -> list[Decision]:
    if not vectors:
        return []
    X = np.vstack([v.values for v in vectors])
    s = krr.scores(model, X)
    labels = krr.decide(s, model.threshold)
    return [Decision(v.k, float(si), int(li), (v.k + 1) * window_size) for v, si, li in zip(vectors, s, labels)]


def respond(decisions: Sequence[Decision], policy: SessionPolicy, window_size: float,
            sink: Callable[[ResponseEvent], None] | None = None) -> list[ResponseEvent]:
    """Response events for every completed run of rejections.

    The reject counter restarts after each response, i.e. the session is
    taken to be re-established once the device has been unlocked again.
    """
    r = int(policy.consecutive_rejects_to_lock)
    events = []
    run = 0
    for d in decisions:
        run = run + 1 if d.label == -1 else 0
        if run == r:
            ev = ResponseEvent((d.k + 1) * window_size, policy.mode.value,
                               f"{r} consecutive rejected window(s) ending at k={d.k}", d.k)
            events.append(ev)
            if sink is not None:
                sink(ev)
            run = 0
    return events


def run_session(model: krr.KrrModel, trace: PairedTrace, policy: SessionPolicy = SessionPolicy(),
                window_size: float = 6.0, sink: Callable[[ResponseEvent], None] | None = _log_sink) -> SessionResult:
    vectors = extract_features(trace, window_size)
    decisions = _decisions(model, vectors, window_size)
    return SessionResult(decisions, respond(decisions, policy, window_size, sink), window_size)
