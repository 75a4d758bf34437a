"""Kernel ridge regression classifier with dual and primal closed-form solvers.

Data matrices are ``(N, M)``: one row per sample, one column per feature.

Dual:    alpha = (K + rho I_N)^-1 y,   score(x) = sum_i alpha_i k(x_i, x)
Primal:  w = (X^T X + rho I_M)^-1 X^T y,   score(x) = w . x   (linear kernel)

The two agree by the push-through identity
``X^T (X X^T + rho I)^-1 = (X^T X + rho I)^-1 X^T``; the primal route only
factors an ``M x M`` system, which is what makes it cheap when N >> M.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: Literal["linear", "rbf"] = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"rbf gamma must be positive, got {self.gamma}")

    def resolved(self, n_features: int) -> "KernelSpec":
        if self.kind == "rbf" and self.gamma is None:
            return KernelSpec("rbf", 1.0 / n_features)
        return self

    def matrix(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return A @ B.T
        gamma = self.gamma if self.gamma is not None else 1.0 / A.shape[1]
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))


LINEAR = KernelSpec("linear")


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    @classmethod
    def identity(cls, n_features: int) -> "Standardization":
        return cls(np.zeros(n_features), np.ones(n_features))


def standardize_fit(X: np.ndarray) -> Standardization:
    """Per-feature mean and population standard deviation.

    Constant features get scale 1 so they map to 0 rather than NaN.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("standardize_fit needs at least 2 samples")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return Standardization(mean, scale)


@dataclass(frozen=True, eq=False)
class KrrModel:
    kernel: KernelSpec
    rho: float
    standardization: Standardization
    form: Literal["dual", "primal"]
    weights: np.ndarray | None = None  # primal w, length M
    train_X: np.ndarray | None = None  # dual: standardized training rows (N, M)
    alpha: np.ndarray | None = None  # dual coefficients, length N
    threshold: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.form == "primal":
            if self.kernel.kind != "linear":
                raise ValueError("primal form requires the linear kernel")
            if self.weights is None:
                raise ValueError("primal model without weights")
        elif self.form == "dual":
            if self.train_X is None or self.alpha is None:
                raise ValueError("dual model without training data")
        else:
            raise ValueError(f"unknown solver form {self.form!r}")
        for a in (self.weights, self.train_X, self.alpha, self.standardization.mean, self.standardization.scale):
            if a is not None and not np.all(np.isfinite(a)):
                raise ValueError("model contains non-finite values")

    @property
    def n_features(self) -> int:
        return len(self.standardization.mean)

    def with_threshold(self, threshold: float) -> "KrrModel":
        return KrrModel(self.kernel, self.rho, self.standardization, self.form,
                        self.weights, self.train_X, self.alpha, float(threshold))

    # -- persistence --------------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "format_version": FORMAT_VERSION,
            "kernel": {"kind": self.kernel.kind, "gamma": self.kernel.gamma},
            "rho": self.rho,
            "threshold": self.threshold,
            "standardization": {"mean": self.standardization.mean.tolist(),
                                "scale": self.standardization.scale.tolist()},
            "form": self.form,
        }
        if self.form == "primal":
            d["weights"] = self.weights.tolist()
        else:
            d["train_X"] = self.train_X.tolist()
            d["alpha"] = self.alpha.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KrrModel":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")
        st = Standardization(np.array(d["standardization"]["mean"], float),
                             np.array(d["standardization"]["scale"], float))
        arr = lambda key: None if key not in d else np.array(d[key], dtype=float)  # noqa: E731
        return cls(KernelSpec(d["kernel"]["kind"], d["kernel"].get("gamma")), float(d["rho"]), st,
                   d["form"], arr("weights"), arr("train_X"), arr("alpha"), float(d["threshold"]))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "KrrModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cholesky solve of a symmetric positive definite system."""
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"{A.shape[0]}x{A.shape[0]} system is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def _prepare(X, y, rho, standardize):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("X must be a nonempty (N, M) matrix")
    if len(y) != X.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {len(y)} labels")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    st = standardize_fit(X) if standardize else Standardization.identity(X.shape[1])
    return st.apply(X), y, st


def train_dual(X, y, rho: float = 1.0, kernel: KernelSpec = LINEAR, standardize: bool = True,
               threshold: float = 0.0) -> KrrModel:
    Z, y, st = _prepare(X, y, rho, standardize)
    kernel = kernel.resolved(Z.shape[1])
    K = kernel.matrix(Z, Z)
    alpha = _solve_spd(K + rho * np.eye(len(y)), y)
    return KrrModel(kernel, float(rho), st, "dual", train_X=Z, alpha=alpha, threshold=threshold)


def train_primal(X, y, rho: float = 1.0, kernel: KernelSpec = LINEAR, standardize: bool = True,
                 threshold: float = 0.0) -> KrrModel:
    if kernel.kind != "linear":
        raise ValueError("train_primal supports only the linear kernel")
    Z, y, st = _prepare(X, y, rho, standardize)
    w = _solve_spd(Z.T @ Z + rho * np.eye(Z.shape[1]), Z.T @ y)
    return KrrModel(kernel, float(rho), st, "primal", weights=w, threshold=threshold)


def train(X, y, rho: float = 1.0, kernel: KernelSpec = LINEAR, solver: str = "auto",
          standardize: bool = True, threshold: float = 0.0) -> KrrModel:
    """Train with the primal solver for linear kernels unless told otherwise."""
    if solver == "auto":
        solver = "primal" if kernel.kind == "linear" else "dual"
    if solver == "primal":
        return train_primal(X, y, rho, kernel, standardize, threshold)
    if solver == "dual":
        return train_dual(X, y, rho, kernel, standardize, threshold)
    raise ValueError(f"unknown solver {solver!r}")


def scores(model: KrrModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    Z = model.standardization.apply(X)
    if model.form == "primal":
        return Z @ model.weights
    return model.kernel.matrix(Z, model.train_X) @ model.alpha


def score(model: KrrModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("score takes a single feature vector")
    return float(scores(model, x[None, :])[0])


def decide(s, threshold: float = 0.0):
    """+1 where score >= threshold, else -1 (ties go to the legitimate user)."""
    return np.where(np.asarray(s) >= threshold, 1, -1)


def classify(model: KrrModel, x, threshold: float | None = None) -> int:
    t = model.threshold if threshold is None else threshold
    return int(decide(score(model, x), t))
