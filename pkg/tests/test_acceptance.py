"""Acceptance gate. Each test carries ``criterion(n)``; the conftest hook
prints one PASS/FAIL line per criterion at the end of the run."""
import json
import time

import numpy as np
import pytest

from iauth import krr
from iauth.cli import main
from iauth.evaluation import (CvConfig, compute_metrics, cross_validate, escape_probability, simulate_masquerade,
                              sweep_data_size, sweep_window_size)
from iauth.features import PHONE_COLUMNS, extract_features, feature_matrix, freq_features, spectrum
from iauth.krr import standardize_fit, train_dual, train_primal
from iauth.synth import gait_profile, save_profile, synthesize_user_trace


def naive_dft(s):
    s = np.asarray(s, dtype=float)
    t = np.arange(len(s))
    return np.array([abs(np.sum(s * np.exp(-2j * np.pi * j * t / len(s)))) for j in range(len(s) // 2 + 1)])


@pytest.fixture(scope="module")
def a1():
    legit = synthesize_user_trace(gait_profile("u1", 1.0, 0.3, seed=1), 4800.0)
    other = synthesize_user_trace(gait_profile("u2", 1.6, 0.3, seed=2), 4800.0)
    return legit, other


# 1 -------------------------------------------------------------------------------

@pytest.mark.criterion(1)
def test_c1_metric_identity():
    t0 = time.perf_counter()
    truth = np.r_[np.ones(1000), -np.ones(1000)]
    pred = np.r_[np.ones(917), -np.ones(83), np.ones(75), -np.ones(925)]
    m = compute_metrics(truth, pred)
    assert m.frr == pytest.approx(0.083, abs=1e-15) and m.far == pytest.approx(0.075, abs=1e-15)
    assert abs(m.accuracy - 0.921) <= 1e-12
    assert time.perf_counter() - t0 < 1


# 2 -------------------------------------------------------------------------------

@pytest.mark.criterion(2)
def test_c2_escape_probability():
    t0 = time.perf_counter()
    p = escape_probability(0.075, 3)
    assert abs(p - 4.21875e-4) <= 1e-15
    assert f"{p:.2%}" == "0.04%"
    grid = np.linspace(0.01, 0.99, 100)
    for n in range(1, 6):
        vals = [escape_probability(q, n) for q in grid]
        assert np.all(np.diff(vals) > 0)
        assert all(escape_probability(q, n + 1) < escape_probability(q, n) for q in grid)
    assert time.perf_counter() - t0 < 1


# 3 -------------------------------------------------------------------------------

@pytest.mark.criterion(3)
def test_c3_primal_dual_equivalence(monkeypatch):
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        rng = np.random.default_rng(1000 + i)
        n = (50, 800)[i % 2]
        X = rng.normal(size=(n, 28)) * rng.uniform(0.1, 20, 28) + rng.uniform(-5, 5, 28)
        X = standardize_fit(X).apply(X)
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        T = rng.normal(size=(50, 28))
        d = krr.scores(train_dual(X, y, 1.0), T)
        p = krr.scores(train_primal(X, y, 1.0), T)
        worst = max(worst, float(np.max(np.abs(d - p))))
    assert worst <= 1e-8

    shapes = []
    orig = krr._solve_spd
    monkeypatch.setattr(krr, "_solve_spd", lambda A, b: shapes.append(A.shape) or orig(A, b))
    train_primal(X, y)
    assert shapes == [(28, 28)]
    assert time.perf_counter() - t0 < 30


# 4 -------------------------------------------------------------------------------

@pytest.mark.criterion(4)
@pytest.mark.parametrize("n", [8, 64, 300])
def test_c4_dft_oracle(n):
    t0 = time.perf_counter()
    rng = np.random.default_rng(n)
    for _ in range(20):
        s = rng.normal(3.0, 2.0, n)
        fast = spectrum(s, 50.0).magnitudes
        slow = naive_dft(s)
        assert np.max(np.abs(fast - slow)) / np.max(slow) <= 1e-9
        mirror = slow[1: (n + 1) // 2]
        energy = slow[0] ** 2 + 2 * np.sum(mirror**2) + (slow[-1] ** 2 if n % 2 == 0 else 0.0)
        assert abs(energy / n - np.sum(s**2)) <= 1e-6 * np.sum(s**2)
    assert time.perf_counter() - t0 < 10


# 5 -------------------------------------------------------------------------------

@pytest.mark.criterion(5)
def test_c5_offset_cosine():
    t = np.arange(300) / 50.0
    energy, freq, energy_fre = freq_features(spectrum(10 + np.cos(2 * np.pi * 2 * t), 50.0))
    assert freq == 2.0
    assert abs(energy_fre - 150.0) <= 1e-6
    assert energy == pytest.approx(3000.0)


# 6 -------------------------------------------------------------------------------

@pytest.mark.criterion(6)
def test_c6_separability(a1):
    t0 = time.perf_counter()
    legit, other = a1
    L = feature_matrix(extract_features(legit))
    O = feature_matrix(extract_features(other))
    assert len(L) == len(O) == 800
    rep = cross_validate(L, O, CvConfig(10, 10, 0))
    assert rep.accuracy_mean >= 0.90 and rep.far_mean <= 0.15 and rep.frr_mean <= 0.15

    twin = synthesize_user_trace(gait_profile("u3", 1.0, 0.3, seed=3), 4800.0)
    T = feature_matrix(extract_features(twin))
    control = cross_validate(L, T, CvConfig(10, 10, 0))
    assert abs(control.accuracy_mean - 0.5) <= 0.05
    assert time.perf_counter() - t0 < 300


# 7 -------------------------------------------------------------------------------

def _two_device_margin(seed):
    pa = gait_profile("a", 1.0, 1.0, seed=100 + seed, watch_harmonics=(1.0, 0.3))
    pb = gait_profile("b", 1.0, 1.0, seed=200 + seed, watch_harmonics=(1.0, 0.6), acc_amplitude=(0.6, 0.9, 2.1))
    A = feature_matrix(extract_features(synthesize_user_trace(pa, 1200.0)))
    B = feature_matrix(extract_features(synthesize_user_trace(pb, 1200.0)))
    cfg = CvConfig(10, 1, seed)
    full = cross_validate(A, B, cfg).accuracy_mean
    phone = cross_validate(A, B, cfg, columns=PHONE_COLUMNS).accuracy_mean
    return full - phone


@pytest.mark.criterion(7)
def test_c7_two_device_gain():
    t0 = time.perf_counter()
    assert len(PHONE_COLUMNS) == 14
    margins = np.array([_two_device_margin(s) for s in range(50)])
    assert np.mean(margins >= 0) >= 0.90
    assert time.perf_counter() - t0 < 600


# 8 -------------------------------------------------------------------------------

@pytest.mark.criterion(8)
def test_c8_sweep_shapes(a1):
    t0 = time.perf_counter()
    legit, other = a1
    win = sweep_window_size([legit], [other], [1, 6], CvConfig(10, 3, 0), max_per_class=800)
    one, six = win.metrics
    assert six.far <= one.far and six.frr <= one.frr

    L = feature_matrix(extract_features(legit))
    O = feature_matrix(extract_features(other))
    size = sweep_data_size(L, O, [100, 800], CvConfig(10, 3, 0))
    assert size.metrics[1].accuracy >= size.metrics[0].accuracy
    assert time.perf_counter() - t0 < 900


# 9 -------------------------------------------------------------------------------

@pytest.mark.criterion(9)
def test_c9_attack_simulation():
    t0 = time.perf_counter()
    legit = synthesize_user_trace(gait_profile("a", 1.0, 1.0, seed=1), 4800.0)
    others = [synthesize_user_trace(gait_profile(f"o{i}", 1.0, 1.0, seed=50 + i, acc_amplitude=(0.6, 0.9, 2.3),
                                                 watch_harmonics=(1.0, 0.6)), 600.0) for i in range(8)]
    L = feature_matrix(extract_features(legit))
    O = np.vstack([feature_matrix(extract_features(o)) for o in others])
    model = krr.train(np.vstack([L, O]), np.r_[np.ones(len(L)), -np.ones(len(O))])
    # one impostor profile, independent noise per attacker: per-window accepts are i.i.d.
    attackers = [synthesize_user_trace(gait_profile(f"x{i}", 1.0, 1.0, seed=1000 + i, acc_amplitude=(0.6, 0.9, 2.25),
                                                    watch_harmonics=(1.0, 0.4)), 36.0) for i in range(400)]
    rep = simulate_masquerade(model, attackers)
    assert 0.05 < rep.far < 0.95
    for n in (1, 2, 3, 5):
        assert abs(rep.survival[n] - rep.analytic[n]) <= 3 * rep.standard_errors[n], n
    assert time.perf_counter() - t0 < 300


# 10 ------------------------------------------------------------------------------

def _run_all(root, out):
    traces = root / "traces"
    model = out / "model.json"
    common = ["--seed", "4"]
    codes = [
        main(["train", "--legit", str(traces / "alice.csv"), "--others", str(traces / "bob.csv"),
              "--data-size", "60", "--out", str(model)] + common),
        main(["run", "--model", str(model), "--trace", str(traces / "mallory.csv"), "--log", str(out / "run.jsonl")]),
        main(["evaluate", "--legit", str(traces / "alice.csv"), "--others", str(traces / "bob.csv"),
              "--iterations", "2", "--data-size", "60", "--out", str(out / "eval.json")] + common),
        main(["sweep", "--param", "data", "--grid", "20,40", "--legit", str(traces / "alice.csv"), "--others",
              str(traces / "bob.csv"), "--iterations", "2", "--out-prefix", str(out / "sweep")] + common),
        main(["attack-sim", "--model", str(model), "--attackers", str(traces / "mallory.csv"),
              "--out-prefix", str(out / "att")] + common),
        main(["features", str(traces / "alice.csv"), "--out", str(out / "f.csv")]),
    ]
    return codes


@pytest.mark.criterion(10)
def test_c10_cli_determinism(tmp_path):
    for name, hz, seed in (("alice", 1.0, 1), ("bob", 1.6, 2), ("mallory", 1.6, 3)):
        save_profile(gait_profile(name, hz, 0.3, seed=seed), tmp_path / f"{name}.json")
    profiles = [str(tmp_path / f"{n}.json") for n in ("alice", "bob", "mallory")]
    assert main(["synth", *profiles, "--duration", "360", "--out", str(tmp_path / "traces")]) == 0
    assert main(["synth", *profiles, "--duration", "360", "--out", str(tmp_path / "traces2")]) == 0
    for n in ("alice", "bob", "mallory"):
        assert (tmp_path / "traces" / f"{n}.csv").read_bytes() == (tmp_path / "traces2" / f"{n}.csv").read_bytes()

    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert _run_all(tmp_path, a) == _run_all(tmp_path, b) == [0, 2, 0, 0, 0, 0]
    for name in ("eval.json", "sweep.json", "att.json"):
        pa = json.loads((a / name).read_text())["payload"]
        pb = json.loads((b / name).read_text())["payload"]
        assert json.dumps(pa, sort_keys=True) == json.dumps(pb, sort_keys=True), name
    for name in ("model.json", "run.jsonl", "sweep_far.csv", "sweep_frr.csv", "sweep_accuracy.csv",
                 "att_survival.csv", "f.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
