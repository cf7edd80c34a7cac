"""Entanglement generation rate against memory mode number.

The cycle length is dominated by the fiber and classical delays, so adding
temporal modes raises the rate almost linearly.

    python3 demos/rate_vs_modes.py [--min-bins 5000]
"""

import argparse

import numpy as np

from afcnet.config import ExperimentConfig
from afcnet.experiments import DEFAULT_MODE_NUMBERS, DEFAULT_RATE_MUS, rate_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--min-bins", type=int, default=5000)
    args = parser.parse_args()

    points = rate_sweep(ExperimentConfig(trials=1), DEFAULT_MODE_NUMBERS, DEFAULT_RATE_MUS, args.min_bins)
    table = {(p.mode_number, p.mu): p for p in points}
    print("   M " + "".join(f"  rate(mu={mu}) Hz" for mu in DEFAULT_RATE_MUS))
    for m in DEFAULT_MODE_NUMBERS:
        print(f"{m:>4} " + "".join(f"{table[(m, mu)].rate_hz:>18.1f}" for mu in DEFAULT_RATE_MUS))
    for mu in DEFAULT_RATE_MUS:
        x = np.array(DEFAULT_MODE_NUMBERS, dtype=float)
        y = np.array([table[(m, mu)].rate_hz for m in DEFAULT_MODE_NUMBERS])
        slope = np.polyfit(x, y, 1)[0]
        p_h = np.mean([table[(m, mu)].p_herald for m in DEFAULT_MODE_NUMBERS])
        print(f"mu={mu}: slope {slope:.1f} Hz per mode, mean p_h {p_h:.4f}")


if __name__ == "__main__":
    main()
