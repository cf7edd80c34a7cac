"""Effective fidelity over a grid of source mean photon numbers.

Prints the surface as a table. Fidelity falls as either source gets brighter,
and is highest when the two sources are balanced.

    python3 demos/fidelity_surface.py [--min-heralds 500]
"""

import argparse

from afcnet.config import ExperimentConfig
from afcnet.experiments import DEFAULT_MU_GRID, fidelity_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--min-heralds", type=int, default=500)
    args = parser.parse_args()

    cfg = ExperimentConfig(trials=20)
    points = {(p.mu1, p.mu2): p for p in fidelity_sweep(cfg, DEFAULT_MU_GRID, args.min_heralds)}
    print("mu1 \\ mu2 " + "".join(f"{m:>9}" for m in DEFAULT_MU_GRID))
    for m1 in DEFAULT_MU_GRID:
        print(f"{m1:>9} " + "".join(f"{points[(m1, m2)].fidelity:9.4f}" for m2 in DEFAULT_MU_GRID))
    heralds = sum(p.n_heralds for p in points.values())
    bins = sum(p.n_bins for p in points.values())
    print(f"\n{heralds} heralds over {bins} temporal bins")


if __name__ == "__main__":
    main()
