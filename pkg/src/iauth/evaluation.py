"""FAR/FRR metrics, repeated stratified cross-validation, sweeps and
masquerade-attack analysis."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import krr
from .features import AuthVector, extract_features, feature_matrix
from .pipeline import SessionPolicy, run_session
from .sensors import PairedTrace

DEFAULT_WINDOW_GRID = (1, 2, 4, 6, 8, 12, 16)
DEFAULT_SIZE_GRID = (100, 200, 400, 800, 1200)


@dataclass(frozen=True)
class Metrics:
    far: float
    frr: float
    accuracy: float
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> Metrics:
    far = fp / (fp + tn) if fp + tn else 0.0
    frr = fn / (fn + tp) if fn + tp else 0.0
    return Metrics(far, frr, 1.0 - (far + frr) / 2.0, int(tp), int(fp), int(tn), int(fn))


def compute_metrics(truth, predicted) -> Metrics:
    truth = np.asarray(truth).reshape(-1)
    predicted = np.asarray(predicted).reshape(-1)
    if len(truth) != len(predicted):
        raise ValueError(f"length mismatch: {len(truth)} labels vs {len(predicted)} predictions")
    if len(truth) == 0:
        raise ValueError("compute_metrics needs at least one label")
    legit = truth == 1
    accepted = predicted == 1
    return metrics_from_counts(
        tp=np.sum(legit & accepted), fp=np.sum(~legit & accepted),
        tn=np.sum(~legit & ~accepted), fn=np.sum(legit & ~accepted),
    )


def far_frr_curve(truth, s, thresholds) -> tuple[np.ndarray, np.ndarray]:
    """FAR and FRR of a fixed score set at each threshold."""
    far, frr = [], []
    for t in thresholds:
        m = compute_metrics(truth, krr.decide(s, t))
        far.append(m.far)
        frr.append(m.frr)
    return np.array(far), np.array(frr)


@dataclass(frozen=True)
class CvConfig:
    folds: int = 10
    iterations: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class TrainerConfig:
    rho: float = 1.0
    kernel: krr.KernelSpec = krr.LINEAR
    solver: str = "auto"
    threshold: float = 0.0

    def fit(self, X, y) -> krr.KrrModel:
        return krr.train(X, y, self.rho, self.kernel, self.solver, threshold=self.threshold)


@dataclass
class CvReport:
    """Mean and std over iterations; each iteration pools its folds' predictions."""

    far_mean: float
    far_std: float
    frr_mean: float
    frr_std: float
    accuracy_mean: float
    accuracy_std: float
    per_iteration: list[Metrics]
    per_fold: list[list[Metrics]]
    folds: int
    seed: int
    n_legit: int
    n_others: int

    @property
    def mean(self) -> Metrics:
        tot = {k: sum(getattr(m, k) for m in self.per_iteration) for k in ("tp", "fp", "tn", "fn")}
        return Metrics(self.far_mean, self.frr_mean, self.accuracy_mean, **tot)

    def to_dict(self, breakdown: bool = True) -> dict:
        d = {k: getattr(self, k) for k in ("far_mean", "far_std", "frr_mean", "frr_std", "accuracy_mean",
                                           "accuracy_std", "folds", "seed", "n_legit", "n_others")}
        d["iterations"] = len(self.per_iteration)
        if breakdown:
            d["per_iteration"] = [m.to_dict() for m in self.per_iteration]
            d["per_fold"] = [[m.to_dict() for m in it] for it in self.per_fold]
        return d


def as_matrix(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return np.atleast_2d(data.astype(float))
    data = list(data)
    if data and isinstance(data[0], AuthVector):
        return feature_matrix(data)
    return np.atleast_2d(np.asarray(data, dtype=float))


def stratified_folds(n_legit: int, n_others: int, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per sample (legit rows first). Each class is shuffled and dealt
    round-robin, continuing across classes so fold sizes stay balanced."""
    order = np.concatenate([rng.permutation(n_legit), n_legit + rng.permutation(n_others)])
    fold_of = np.empty(n_legit + n_others, dtype=int)
    fold_of[order] = np.arange(n_legit + n_others) % folds
    return fold_of


def cross_validate(legit, others, cfg: CvConfig = CvConfig(), trainer: TrainerConfig = TrainerConfig(),
                   columns: Sequence[int] | None = None) -> CvReport:
    """Repeated stratified k-fold CV of the legit-vs-others classifier.

    ``columns`` restricts the feature set (e.g. phone-only); fold assignment
    depends only on the class sizes and seed, so restricted and full runs
    share folds.
    """
    L, O = as_matrix(legit), as_matrix(others)
    if len(L) == 0 or len(O) == 0:
        raise ValueError("both classes must be nonempty")
    if min(len(L), len(O)) < 2:
        raise ValueError("each class needs at least 2 samples for cross-validation")
    if cfg.folds > len(L) + len(O):
        raise ValueError(f"{cfg.folds} folds exceed the {len(L) + len(O)} available samples")
    X = np.vstack([L, O])
    if columns is not None:
        X = X[:, np.asarray(columns)]
    y = np.concatenate([np.ones(len(L)), -np.ones(len(O))])

    per_iteration, per_fold = [], []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.iterations):
        rng = np.random.default_rng(child)
        fold_of = stratified_folds(len(L), len(O), cfg.folds, rng)
        pred = np.zeros(len(y))
        fold_metrics = []
        for f in range(cfg.folds):
            test = fold_of == f
            model = trainer.fit(X[~test], y[~test])
            pred[test] = krr.decide(krr.scores(model, X[test]), model.threshold)
            fold_metrics.append(compute_metrics(y[test], pred[test]))
        per_iteration.append(compute_metrics(y, pred))
        per_fold.append(fold_metrics)

    far = np.array([m.far for m in per_iteration])
    frr = np.array([m.frr for m in per_iteration])
    acc = np.array([m.accuracy for m in per_iteration])
    return CvReport(float(far.mean()), float(far.std()), float(frr.mean()), float(frr.std()),
                    float(1.0 - (far.mean() + frr.mean()) / 2.0), float(acc.std()),
                    per_iteration, per_fold, cfg.folds, cfg.seed, len(L), len(O))


@dataclass
class SweepReport:
    parameter: str
    grid: list[float]
    metrics: list[Metrics]
    seed: int
    reports: list[CvReport] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "grid": list(self.grid), "seed": self.seed,
                "metrics": [m.to_dict() for m in self.metrics],
                "std": [{"far": r.far_std, "frr": r.frr_std, "accuracy": r.accuracy_std} for r in self.reports]}

    def csv(self, metric: str) -> str:
        lines = [f"{self.parameter},{metric}"]
        lines += [f"{g:g},{getattr(m, metric)!r}" for g, m in zip(self.grid, self.metrics)]
        return "\n".join(lines) + "\n"


def _pool_features(traces: Sequence[PairedTrace], window_size: float, limit: int | None) -> np.ndarray:
    X = np.vstack([feature_matrix(extract_features(t, window_size)) for t in traces])
    return X if limit is None else X[:limit]


def sweep_window_size(legit_traces: Sequence[PairedTrace], other_traces: Sequence[PairedTrace],
                      grid: Sequence[float] = DEFAULT_WINDOW_GRID, cfg: CvConfig = CvConfig(),
                      trainer: TrainerConfig = TrainerConfig(), max_per_class: int | None = None) -> SweepReport:
    """Re-extract features at each window size and cross-validate.

    ``max_per_class`` caps the vectors per class so shorter windows do not
    also mean more training data.
    """
    if not len(grid):
        raise ValueError("empty grid")
    reports = []
    for ws in grid:
        L = _pool_features(legit_traces, ws, max_per_class)
        O = _pool_features(other_traces, ws, max_per_class)
        reports.append(cross_validate(L, O, cfg, trainer))
    return SweepReport("window", [float(g) for g in grid], [r.mean for r in reports], cfg.seed, reports)


def sweep_data_size(legit, others, grid: Sequence[int] = DEFAULT_SIZE_GRID, cfg: CvConfig = CvConfig(),
                    trainer: TrainerConfig = TrainerConfig()) -> SweepReport:
    """Cross-validate seeded subsamples of ``size`` vectors per class."""
    L, O = as_matrix(legit), as_matrix(others)
    if not len(grid):
        raise ValueError("empty grid")
    for size in grid:
        if size > min(len(L), len(O)):
            raise ValueError(f"data size {size} exceeds available vectors (legit {len(L)}, others {len(O)})")
    reports = []
    for i, (size, child) in enumerate(zip(grid, np.random.SeedSequence([cfg.seed, 1]).spawn(len(grid)))):
        rng = np.random.default_rng(child)
        Ls = L[np.sort(rng.choice(len(L), size, replace=False))]
        Os = O[np.sort(rng.choice(len(O), size, replace=False))]
        reports.append(cross_validate(Ls, Os, cfg, trainer))
    return SweepReport("data_size", [int(g) for g in grid], [r.mean for r in reports], cfg.seed, reports)


def escape_probability(p: float, n: int) -> float:
    """Chance an attacker accepted with per-window probability ``p`` survives
    ``n`` independent windows."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return float(p) ** int(n)


@dataclass
class DetectionTimeReport:
    window_size: float
    detection_windows: list[int | None]  # first response window index per attacker
    far: float  # pooled per-window acceptance rate over all attacker windows
    survival: list[float]  # Monte Carlo fraction still undetected after n windows
    n_windows: list[int] = field(default_factory=list)

    @property
    def n_attackers(self) -> int:
        return len(self.detection_windows)

    @property
    def detection_times(self) -> list[float | None]:
        return [None if k is None else (k + 1) * self.window_size for k in self.detection_windows]

    @property
    def fraction_undetected(self) -> float:
        if not self.detection_windows:
            return 0.0
        return sum(k is None for k in self.detection_windows) / self.n_attackers

    @property
    def analytic(self) -> list[float]:
        return [escape_probability(self.far, n) for n in range(len(self.survival))]

    @property
    def standard_errors(self) -> list[float]:
        a = np.array(self.analytic)
        return (np.sqrt(a * (1 - a) / self.n_attackers) if self.n_attackers else np.zeros_like(a)).tolist()

    def time_to_detect(self, fraction: float) -> float | None:
        """Earliest time by which at least ``fraction`` of attackers were caught."""
        times = sorted(t for t in self.detection_times if t is not None)
        need = math.ceil(fraction * self.n_attackers - 1e-12)
        if need == 0 or self.n_attackers == 0:
            return 0.0 if self.n_attackers else None
        return times[need - 1] if len(times) >= need else None

    def to_dict(self) -> dict:
        return {
            "window_size": self.window_size,
            "n_attackers": self.n_attackers,
            "measured_far": self.far,
            "fraction_undetected": self.fraction_undetected,
            "detection_times": self.detection_times,
            "time_to_detect": {str(q): self.time_to_detect(q) for q in (0.5, 0.9, 1.0)},
            "survival_mc": self.survival,
            "survival_analytic": self.analytic,
            "standard_error": self.standard_errors,
        }

    def csv(self) -> str:
        lines = ["n,t,survival_mc,survival_analytic"]
        for n, (mc, an) in enumerate(zip(self.survival, self.analytic)):
            lines.append(f"{n},{n * self.window_size:g},{mc!r},{an!r}")
        return "\n".join(lines) + "\n"


def simulate_masquerade(model: krr.KrrModel, attacker_traces: Sequence[PairedTrace],
                        policy: SessionPolicy = SessionPolicy(), window_size: float = 6.0,
                        max_windows: int | None = None) -> DetectionTimeReport:
    """Run every attacker trace through a session and tabulate time to detection."""
    detections, accepted, total, lengths = [], 0, 0, []
    for trace in attacker_traces:
        res = run_session(model, trace, policy, window_size, sink=None)
        detections.append(res.first_response_window)
        accepted += sum(d.label == 1 for d in res.decisions)
        total += len(res.decisions)
        lengths.append(len(res.decisions))
    if not detections:
        return DetectionTimeReport(window_size, [], 0.0, [])
    horizon = min(lengths) if max_windows is None else min(min(lengths), max_windows)
    survival = [sum(k is None or k >= n for k in detections) / len(detections) for n in range(horizon + 1)]
    return DetectionTimeReport(window_size, detections, accepted / total, survival, lengths)
