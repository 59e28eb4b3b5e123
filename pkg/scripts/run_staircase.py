"""Simulate the 25-45 Hz staircase, estimate, and print per-step errors.

    python scripts/run_staircase.py [--config configs/bench.toml] [--seed 1] [--outdir runs]
"""
import argparse
from pathlib import Path

from pcpsense.config import load_config
from pcpsense.verify import check_staircase, run_staircase


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--outdir", type=Path, help="also write the estimate series as CSV")
    args = ap.parse_args()
    cfg = load_config(args.config)
    outcome = run_staircase(cfg, seed=args.seed)
    print(f"{'f [Hz]':>7} {'speed':>10} {'torque':>10} {'y':>10}")
    for s in outcome.steps:
        print(f"{s.f_hz:7.1f} {s.speed:10.2e} {s.torque:10.2e} {s.y:10.2e}")
    for r in check_staircase(outcome):
        print(r.line())
    if args.outdir:
        import numpy as np
        args.outdir.mkdir(parents=True, exist_ok=True)
        cols = ("t", "omega_s", "omega_p", "T_p", "y_hat", "p_min_eig")
        data = np.column_stack([outcome.series[c] for c in cols])
        np.savetxt(args.outdir / "staircase_estimate.csv", data, delimiter=",",
                   header=",".join(cols), comments="")


if __name__ == "__main__":
    main()
