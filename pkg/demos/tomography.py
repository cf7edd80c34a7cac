"""Simulated tomography of the heralded memory state.

Reconstructs the effective density matrix from a direct-detection run and a
phase sweep, and compares it with the memory state read straight out of the
simulation.

    python3 demos/tomography.py [--min-heralds 4000] [--min-plus-per-phase 500]
"""

import argparse

import numpy as np

from afcnet.config import ExperimentConfig
from afcnet.experiments import tomography

LABELS = ("00", "01", "10", "11")


def show(title, m):
    print(title)
    print("      " + "".join(f"{l:>9}" for l in LABELS))
    for label, row in zip(LABELS, m):
        print(f"  {label}  " + "".join(f"{v:9.4f}" for v in row))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--min-heralds", type=int, default=4000)
    parser.add_argument("--min-plus-per-phase", type=int, default=500)
    args = parser.parse_args()

    res = tomography(ExperimentConfig(trials=10), args.min_heralds, args.min_plus_per_phase)
    show("reconstructed |rho|", np.abs(res.reconstruction.rho_tilde))
    show("oracle |rho| (qubit sector of the stored state)", np.abs(res.oracle))
    for k, fit in sorted(res.coherence.fits.items()):
        print(f"detector {k + 1}: visibility {fit.visibility:.3f}")
    print(f"|d| reconstructed {res.coherence.d_abs / res.reconstruction.normalization:.4f}, "
          f"oracle {res.oracle_d_abs:.4f}, uncorrected {res.d_abs_uncorrected:.4f}")


if __name__ == "__main__":
    main()
