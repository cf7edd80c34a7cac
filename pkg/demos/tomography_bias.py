"""Noise-free output of the direct-detection estimator.

Feeds the exact click probabilities of a heralded memory state into the
population estimator. The difference from the qubit-sector populations is the
bias left over at infinite sample size, caused by two-photon memory
components that threshold detectors count as single excitations.

    python3 demos/tomography_bias.py
"""

import numpy as np

from afcnet import fock
from afcnet.analysis import qubit_sector
from afcnet.config import ExperimentConfig
from afcnet.experiments import path_transmission
from afcnet.hardware import Herald
from afcnet.protocol import Topology, run_cycle


def first_plus_state(topology):
    trial = 0
    while True:
        for r in run_cycle(topology, trial):
            if r.herald is Herald.PLUS:
                return r.memory_state
        trial += 1


def main():
    cfg = ExperimentConfig()
    topology = Topology(cfg)
    rho = first_plus_state(topology)
    eta, pd = path_transmission(cfg), topology.detector().p_dark
    det = fock.with_dark_counts(fock.detector_povm(eta, rho.space), pd)
    joint = fock.product_povm(det, det)
    p = dict(zip(joint.labels, fock.outcome_probabilities(rho, joint, [0, 1])))

    c1, c2, c12 = p[(1, 0)] + p[(1, 1)], p[(0, 1)] + p[(1, 1)], p[(1, 1)]
    p11 = c12 / eta**2
    p10, p01 = (c1 - pd) / eta - p11, (c2 - pd) / eta - p11
    est = np.array([1 - p10 - p01 - p11, p01, p10, p11])
    sector, weight = qubit_sector(rho)
    oracle = np.real(np.diag(sector))

    print(f"path transmission {eta:.4f}, qubit-sector weight {weight:.4f}")
    print("        estimator   oracle     bias")
    for label, e, o in zip(("p00", "p01", "p10", "p11"), est, oracle):
        print(f"  {label}  {e:9.4f} {o:9.4f} {e - o:+9.4f}")
    pops = np.real(np.diag(rho.data)).reshape(rho.space.dim, rho.space.dim)
    print(f"two-photon populations |20>, |02>: {pops[2, 0]:.4f}, {pops[0, 2]:.4f}")


if __name__ == "__main__":
    main()
