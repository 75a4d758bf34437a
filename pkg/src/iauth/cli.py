"""Command-line entry point: ``iauth {synth,train,run,evaluate,sweep,attack-sim}``.

Exit codes: 0 success (for ``run``: authenticated), 2 de-authentication
triggered, 1 usage or configuration error.
"""
from __future__ import annotations

import argparse
import datetime
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import evaluation as ev
from . import krr
from .features import extract_features, feature_matrix, write_feature_csv
from .pipeline import ResponseMode, SessionPolicy, run_session
from .sensors import DEFAULT_RATE, TraceFormatError, read_trace, uniform_trace, write_trace
from .synth import load_profile, synthesize_user_trace

log = logging.getLogger("iauth")

EXIT_OK, EXIT_ERROR, EXIT_DEAUTH = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    window_size: float = 6.0
    rate: float = DEFAULT_RATE
    data_size: int | None = 800
    rho: float = 1.0
    kernel: str = "linear"
    gamma: float | None = None
    solver: str = "auto"
    threshold: float = 0.0
    folds: int = 10
    iterations: int = 10
    seed: int = 0
    consecutive_rejects: int = 1
    response: str = "lock"

    def validate(self) -> None:
        if not self.window_size > 0 or round(self.window_size * self.rate) < 2:
            raise UsageError(f"--window-size {self.window_size} gives fewer than 2 samples per window")
        if not self.rate > 0:
            raise UsageError("--rate must be positive")
        if self.data_size is not None and self.data_size < 2:
            raise UsageError("--data-size must be >= 2")
        if not self.rho > 0:
            raise UsageError("--rho must be positive")
        if self.kernel not in ("linear", "rbf"):
            raise UsageError(f"unknown kernel {self.kernel!r}")
        if self.gamma is not None and (self.kernel != "rbf" or not self.gamma > 0):
            raise UsageError("--gamma requires --kernel rbf and a positive value")
        if self.solver not in ("auto", "primal", "dual"):
            raise UsageError(f"unknown solver {self.solver!r}")
        if self.solver == "primal" and self.kernel != "linear":
            raise UsageError("--solver primal requires --kernel linear")
        if self.folds < 2:
            raise UsageError("--folds must be >= 2")
        if self.iterations < 1:
            raise UsageError("--iterations must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if self.consecutive_rejects < 1:
            raise UsageError("--consecutive-rejects must be >= 1")
        if self.response not in [m.value for m in ResponseMode]:
            raise UsageError(f"unknown response mode {self.response!r}")

    @property
    def trainer(self) -> ev.TrainerConfig:
        return ev.TrainerConfig(self.rho, krr.KernelSpec(self.kernel, self.gamma), self.solver, self.threshold)

    @property
    def cv(self) -> ev.CvConfig:
        return ev.CvConfig(self.folds, self.iterations, self.seed)

    @property
    def policy(self) -> SessionPolicy:
        return SessionPolicy(self.consecutive_rejects, ResponseMode(self.response))

    def payload(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# Helpers

def _load_traces(paths: Sequence[str], rate: float):
    return [uniform_trace(read_trace(p), rate) for p in paths]


def _features(paths: Sequence[str], cfg: RunConfig) -> np.ndarray:
    rows = [feature_matrix(extract_features(t, cfg.window_size)) for t in _load_traces(paths, cfg.rate)]
    return np.vstack(rows)


def _subsample(X: np.ndarray, size: int | None, rng: np.random.Generator) -> np.ndarray:
    if size is None or len(X) <= size:
        return X
    return X[np.sort(rng.choice(len(X), size, replace=False))]


def _write_report(path: str | None, command: str, payload: dict) -> None:
    if not path:
        return
    doc = {"metadata": {"command": command,
                        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat()},
           "payload": payload}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _emit(payload: dict, fmt: str, text_rows: list[tuple[str, object]]) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    width = max(len(k) for k, _ in text_rows) if text_rows else 0
    for k, v in text_rows:
        if isinstance(v, float):
            v = f"{v:.6f}"
        print(f"{k:<{width}}  {v}")


def _ensure_writable(*paths) -> None:
    for p in paths:
        if p is None:
            continue
        parent = Path(p).parent
        if parent.exists() and not parent.is_dir():
            raise UsageError(f"cannot write to {p}")


def _metric_rows(prefix: str, m: ev.Metrics) -> list[tuple[str, object]]:
    return [(f"{prefix}far", m.far), (f"{prefix}frr", m.frr), (f"{prefix}accuracy", m.accuracy)]


# --------------------------------------------------------------------------
# Subcommands

def cmd_synth(args, cfg: RunConfig) -> int:
    if not args.duration > 0:
        raise UsageError("--duration must be positive")
    profiles = [load_profile(p) for p in args.profiles]
    if getattr(args, "seed", None) is not None:
        profiles = [p.with_seed(int(np.random.SeedSequence([cfg.seed, i]).generate_state(1, np.uint64)[0]))
                    for i, p in enumerate(profiles)]
    for p in profiles:
        p.check_rate(cfg.rate)
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out {out} is not a directory")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for p in profiles:
        trace = synthesize_user_trace(p, args.duration, cfg.rate)
        path = out / f"{p.user_id}.csv"
        write_trace(trace, path)
        rows.append((p.user_id, f"{path}  {len(trace[next(iter(trace.streams))])} rows/stream  {trace.duration:g} s"))
    _emit({"files": [str(out / f"{p.user_id}.csv") for p in profiles]}, args.format, rows)
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    if not args.others:
        raise UsageError("train needs at least one --others trace for the negative class")
    _ensure_writable(args.out)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
    L = _features(args.legit, cfg)
    O = _features(args.others, cfg)
    if cfg.data_size is not None:
        if len(L) < cfg.data_size:
            raise UsageError(f"--data-size {cfg.data_size} requested but only {len(L)} legitimate windows available")
        L = L[: cfg.data_size]
        O = _subsample(O, cfg.data_size, rng)
    X = np.vstack([L, O])
    y = np.concatenate([np.ones(len(L)), -np.ones(len(O))])
    model = cfg.trainer.fit(X, y)
    d = model.to_dict()
    d["features"] = {"window_size": cfg.window_size, "rate": cfg.rate}
    with open(args.out, "w") as f:
        json.dump(d, f)
        f.write("\n")
    m = ev.compute_metrics(y, krr.decide(krr.scores(model, X), model.threshold))
    payload = {"model": str(args.out), "form": model.form, "n_legit": len(L), "n_others": len(O),
               "training_metrics": m.to_dict()}
    _emit(payload, args.format, [("model", str(args.out)), ("form", model.form), ("n_legit", len(L)),
                                 ("n_others", len(O))] + _metric_rows("train_", m))
    return EXIT_OK


def _load_model(path: str):
    with open(path) as f:
        d = json.load(f)
    return krr.KrrModel.from_dict(d), d.get("features", {})


def cmd_run(args, cfg: RunConfig) -> int:
    model, feats = _load_model(args.model)
    ws = getattr(args, "window_size", None) or feats.get("window_size", cfg.window_size)
    rate = feats.get("rate", cfg.rate)
    _ensure_writable(args.log)
    trace = uniform_trace(read_trace(args.trace), rate)
    result = run_session(model, trace, cfg.policy, ws, sink=None)
    if args.log:
        with open(args.log, "w") as f:
            f.write(result.to_jsonl())
    payload = {"windows": len(result.decisions), "accepted": sum(d.label == 1 for d in result.decisions),
               "status": "deauthenticated" if result.deauthenticated else "authenticated",
               "events": [asdict(e) for e in result.events]}
    rows = [("windows", payload["windows"]), ("accepted", payload["accepted"]), ("status", payload["status"])]
    rows += [(f"event@{e.t:g}s", f"{e.event}: {e.reason}") for e in result.events[:5]]
    if len(result.events) > 5:
        rows.append(("events", f"{len(result.events)} total, see --log or --format json"))
    _emit(payload, args.format, rows)
    return EXIT_DEAUTH if result.deauthenticated else EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    _ensure_writable(args.out)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
    L = _subsample(_features(args.legit, cfg), cfg.data_size, rng)
    O = _subsample(_features(args.others, cfg), cfg.data_size, rng)
    report = ev.cross_validate(L, O, cfg.cv, cfg.trainer)
    payload = {"config": cfg.payload(), "report": report.to_dict(breakdown=args.breakdown)}
    _write_report(args.out, "evaluate", payload)
    _emit(payload["report"], args.format,
          [("n_legit", len(L)), ("n_others", len(O)), ("far", report.far_mean), ("far_std", report.far_std),
           ("frr", report.frr_mean), ("frr_std", report.frr_std), ("accuracy", report.accuracy_mean),
           ("accuracy_std", report.accuracy_std)])
    return EXIT_OK


def _grid(text: str | None, param: str) -> list[float]:
    if text is None:
        return list(ev.DEFAULT_WINDOW_GRID if param == "window" else ev.DEFAULT_SIZE_GRID)
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --grid {text!r}") from None
    if not values:
        raise UsageError("--grid is empty")
    if param == "data":
        if any(v != int(v) or v < 2 for v in values):
            raise UsageError("data-size grid values must be integers >= 2")
        return [int(v) for v in values]
    if any(not v > 0 for v in values):
        raise UsageError("window grid values must be positive")
    return values


def cmd_sweep(args, cfg: RunConfig) -> int:
    grid = _grid(args.grid, args.param)
    prefix = Path(args.out_prefix)
    _ensure_writable(prefix)
    if args.param == "window":
        legit = _load_traces(args.legit, cfg.rate)
        others = _load_traces(args.others, cfg.rate)
        report = ev.sweep_window_size(legit, others, grid, cfg.cv, cfg.trainer, max_per_class=cfg.data_size)
    else:
        L = _features(args.legit, cfg)
        O = _features(args.others, cfg)
        report = ev.sweep_data_size(L, O, grid, cfg.cv, cfg.trainer)
    payload = {"config": cfg.payload(), "report": report.to_dict()}
    prefix.parent.mkdir(parents=True, exist_ok=True)
    _write_report(f"{prefix}.json", "sweep", payload)
    for metric in ("far", "frr", "accuracy"):
        Path(f"{prefix}_{metric}.csv").write_text(report.csv(metric))
    rows = [(f"{report.parameter}={g:g}", f"far {m.far:.4f}  frr {m.frr:.4f}  accuracy {m.accuracy:.4f}")
            for g, m in zip(report.grid, report.metrics)]
    _emit(payload["report"], args.format, rows)
    return EXIT_OK


def cmd_attack_sim(args, cfg: RunConfig) -> int:
    model, feats = _load_model(args.model)
    ws = getattr(args, "window_size", None) or feats.get("window_size", cfg.window_size)
    rate = feats.get("rate", cfg.rate)
    prefix = Path(args.out_prefix)
    _ensure_writable(prefix)
    attackers = [uniform_trace(read_trace(p), rate) for p in args.attackers]
    report = ev.simulate_masquerade(model, attackers, cfg.policy, ws)
    payload = {"config": cfg.payload(), "report": report.to_dict()}
    prefix.parent.mkdir(parents=True, exist_ok=True)
    _write_report(f"{prefix}.json", "attack-sim", payload)
    Path(f"{prefix}_survival.csv").write_text(report.csv())
    rows = [("attackers", report.n_attackers), ("measured_far", report.far),
            ("fraction_undetected", report.fraction_undetected)]
    rows += [(f"detect {int(q * 100)}% by", report.time_to_detect(q)) for q in (0.5, 0.9, 1.0)]
    _emit(payload["report"], args.format, rows)
    return EXIT_OK


def cmd_features(args, cfg: RunConfig) -> int:
    trace = uniform_trace(read_trace(args.trace), cfg.rate)
    label = None if args.label is None else int(args.label)
    vectors = extract_features(trace, cfg.window_size, label)
    write_feature_csv(vectors, args.out)
    _emit({"vectors": len(vectors), "out": args.out}, args.format, [("vectors", len(vectors)), ("out", args.out)])
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser

def _common(p: argparse.ArgumentParser, *groups: str) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--rate", type=float, default=S, help="sampling rate in Hz (default 50)")
    if "features" in groups:
        p.add_argument("--window-size", dest="window_size", type=float, default=S, help="seconds (default 6)")
    if "train" in groups:
        p.add_argument("--data-size", dest="data_size", type=int, default=S, help="vectors per class (default 800)")
        p.add_argument("--rho", type=float, default=S)
        p.add_argument("--kernel", choices=("linear", "rbf"), default=S)
        p.add_argument("--gamma", type=float, default=S)
        p.add_argument("--solver", choices=("auto", "primal", "dual"), default=S)
        p.add_argument("--threshold", type=float, default=S)
    if "cv" in groups:
        p.add_argument("--folds", type=int, default=S)
        p.add_argument("--iterations", type=int, default=S)
    if "policy" in groups:
        p.add_argument("--consecutive-rejects", dest="consecutive_rejects", type=int, default=S)
        p.add_argument("--response", choices=[m.value for m in ResponseMode], default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iauth", description="Continuous authentication from phone and watch motion sensors")
    parser.add_argument("--config", help="JSON file of option defaults; explicit flags win")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="synthesize traces from profile JSON files")
    p.add_argument("profiles", nargs="+")
    p.add_argument("--duration", type=float, default=600.0)
    p.add_argument("--out", required=True, help="output directory")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="dump AuthVectors of one trace as CSV")
    p.add_argument("trace")
    p.add_argument("--out", required=True)
    p.add_argument("--label", choices=("1", "-1"))
    _common(p, "features")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a model for one legitimate user")
    p.add_argument("--legit", nargs="+", required=True)
    p.add_argument("--others", nargs="*", default=[])
    p.add_argument("--out", required=True, help="model JSON path")
    _common(p, "features", "train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="continuous authentication over one trace")
    p.add_argument("--model", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--log", help="decision log (JSONL)")
    _common(p, "features", "policy")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="repeated k-fold cross-validation")
    p.add_argument("--legit", nargs="+", required=True)
    p.add_argument("--others", nargs="+", required=True)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--breakdown", action="store_true", help="include per-iteration/per-fold metrics")
    _common(p, "features", "train", "cv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="window-size or data-size sweep")
    p.add_argument("--param", choices=("window", "data"), required=True)
    p.add_argument("--grid", help="comma-separated values")
    p.add_argument("--legit", nargs="+", required=True)
    p.add_argument("--others", nargs="+", required=True)
    p.add_argument("--out-prefix", dest="out_prefix", required=True)
    _common(p, "features", "train", "cv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("attack-sim", help="masquerade detection-time simulation")
    p.add_argument("--model", required=True)
    p.add_argument("--attackers", nargs="+", required=True)
    p.add_argument("--out-prefix", dest="out_prefix", required=True)
    _common(p, "features", "policy")
    p.set_defaults(func=cmd_attack_sim)
    return parser


_CONFIG_KEYS = {f for f in RunConfig.__dataclass_fields__ if f != "command"}


def make_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            file_cfg = json.load(f)
        unknown = set(file_cfg) - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(file_cfg)
    values.update({k: v for k, v in vars(args).items() if k in _CONFIG_KEYS})
    cfg = RunConfig(command=args.command, **values)
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        return args.func(args, cfg)
    except (UsageError, ValueError, TraceFormatError, krr.ModelFormatError, OSError, KeyError) as exc:
        print(f"iauth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except np.linalg.LinAlgError as exc:
        print(f"iauth {args.command}: linear solve failed: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
