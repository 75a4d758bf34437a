"""Window-size and data-size sweeps on a harder synthetic pair; writes CSVs."""
import argparse
from pathlib import Path

from iauth.evaluation import (DEFAULT_SIZE_GRID, DEFAULT_WINDOW_GRID, CvConfig, sweep_data_size,
                              sweep_window_size)
from iauth.features import extract_features, feature_matrix
from iauth.synth import gait_profile, synthesize_user_trace


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--freq-b", type=float, default=1.02, help="second user's gait frequency")
    ap.add_argument("--noise", type=float, default=1.0)
    ap.add_argument("--duration", type=float, default=7200.0)
    ap.add_argument("--iterations", type=int, default=3)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    a = synthesize_user_trace(gait_profile("a", 1.0, args.noise, seed=1), args.duration)
    b = synthesize_user_trace(gait_profile("b", args.freq_b, args.noise, seed=2, acc_amplitude=(0.6, 0.9, 2.05)),
                              args.duration)
    cfg = CvConfig(10, args.iterations, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    win = sweep_window_size([a], [b], DEFAULT_WINDOW_GRID, cfg, max_per_class=800)
    L = feature_matrix(extract_features(a))
    O = feature_matrix(extract_features(b))
    size = sweep_data_size(L, O, DEFAULT_SIZE_GRID, cfg)
    for rep, name in ((win, "window"), (size, "data")):
        for metric in ("far", "frr", "accuracy"):
            (out / f"sweep_{name}_{metric}.csv").write_text(rep.csv(metric))
        print(f"{rep.parameter} sweep")
        for g, m in zip(rep.grid, rep.metrics):
            print(f"  {g:>6g}  far {m.far:.4f}  frr {m.frr:.4f}  accuracy {m.accuracy:.4f}")


if __name__ == "__main__":
    main()
