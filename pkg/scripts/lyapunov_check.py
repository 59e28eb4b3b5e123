"""Trace the observer Lyapunov value on noise-free constant-speed runs.

For every operating point, report the largest relative step increase of V
above round-off, and whether each increase coincides with a component-sign
warning.
"""
import argparse

import numpy as np

from pcpsense.config import load_config
from pcpsense.plant import constant_profile
from pcpsense.verify import lyapunov_rise, lyapunov_trace


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--duration", type=float, default=2.0)
    args = ap.parse_args()
    cfg = load_config(args.config)
    dt = cfg.scenario.sample_interval
    for f, p in [(25, 2.0), (25, 3.45), (35, 3.45), (45, 4.9)]:
        tr = lyapunov_trace(cfg, constant_profile(f, p, args.duration, sample_interval=dt))
        rise, _ = lyapunov_rise(tr)
        up = np.flatnonzero(rise > 0)
        flagged = (~tr["sign_ok"][up]).all() if up.size else True
        print(f"{f:3d} Hz {p:4.2f} bar: max rise {rise.max():+.3e}, {up.size} rises, "
              f"all under a sign warning: {bool(flagged)}, final V {tr['V'][-1]:.2e}")


if __name__ == "__main__":
    main()
