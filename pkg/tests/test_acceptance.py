"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Lines are printed as each test runs (visible with ``-s``) and repeated in the
"acceptance criteria" section of the terminal summary.
"""

import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

from afcnet import fock
from afcnet import experiments as ex
from afcnet.analysis import (
    AnalyticOracle,
    analytic_heralded_mixture,
    analytic_heralded_state,
    effective_fidelity,
    fit_sinusoid,
    InterferencePoint,
)
from afcnet.cli import main
from afcnet.config import ExperimentConfig
from afcnet.fock import FockSpace
from afcnet.hardware import Spd, direct_povm, interfering_povm
from afcnet.protocol import Topology, heralded_memory_state, run_cycle

# tolerances
ALGEBRA_TOL = 1e-10
ALGEBRA_SECONDS = 10.0
TMSV_TOL = 1e-12
ORACLE_FIDELITY = 1 - 1e-9
ORACLE_HERALDS = 10_000
ORACLE_SECONDS = 120.0
HOM_TOL = 1e-10
SIGMA_FLOOR = 1e-9  # per-herald fidelities are deterministic, so sigma can be ~1e-17
FIDELITY_HERALDS = 5_000
RATE_R2 = 0.99
RATE_BAND_HZ = (10.0, 1000.0)
RATE_MIN_BINS = 20_000
TOMO_ELEMENT_TOL = 0.02
TOMO_VISIBILITY = 0.85
TOMO_D_TOL = 0.01
TOMO_HERALDS = 20_000
TOMO_PLUS_PER_PHASE = 4_000
DESK_SECONDS = 30 * 60

LOSSLESS = {
    "truncation": 1,
    "memory.eta_abs": 1.0,
    "fiber.attenuation_db_per_km": 0.0,
    "detectors.efficiency": 1.0,
    "detectors.dark_count_hz": 0.0,
}


def _random_density(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def _random_unitary(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _state_defect(rho: np.ndarray) -> float:
    return max(abs(np.trace(rho) - 1), np.max(np.abs(rho - rho.conj().T)), max(0.0, -np.linalg.eigvalsh(rho).min()))


def test_criterion_1_algebra(report):
    start = time.perf_counter()
    worst = {"povm": 0.0, "kraus": 0.0, "bs_block": 0.0, "state": 0.0}
    for n in (1, 2, 3):
        space = FockSpace(n)
        for eta in (0.0, 0.3, 0.6, 1.0):
            for pd in (0.0, 1e-6, 0.01):
                det = fock.with_dark_counts(fock.detector_povm(eta, space), pd)
                worst["povm"] = max(worst["povm"], np.max(np.abs(sum(det.elements) - np.eye(space.dim))))
                spd = (Spd(eta, pd * 1e12 / 20_000), Spd(eta, pd * 1e12 / 20_000))
                for joint in (direct_povm(spd, n), interfering_povm(spd, n, math.pi / 4, 0.0),
                              interfering_povm(spd, n, math.pi / 4, math.pi), interfering_povm(spd, n, 0.4, 1.3)):
                    dev = np.max(np.abs(sum(joint.elements) - np.eye(joint.dim)))
                    worst["povm"] = max(worst["povm"], dev)
        for gamma in np.linspace(0, 1, 11):
            ch = fock.gad_channel(gamma, space)
            worst["kraus"] = max(worst["kraus"], np.max(np.abs(ch.completeness() - np.eye(space.dim))))
    for total in range(7):
        for theta, phi in ((math.pi / 4, 0.0), (math.pi / 4, math.pi), (0.3, 1.1)):
            u = fock.beamsplitter_block_unitary(theta, phi, total)
            worst["bs_block"] = max(worst["bs_block"], np.max(np.abs(u.conj().T @ u - np.eye(total + 1))))

    rng = np.random.default_rng(1)
    space = FockSpace(2)
    povm = interfering_povm((Spd(0.6, 150.0), Spd(0.6, 150.0)), 2, math.pi / 4, math.pi)
    for _ in range(20):
        rho = fock.DensityMatrix(space, 3, _random_density(rng, 27))
        outs = [
            fock.apply_channel(rho, fock.gad_channel(rng.random(), space), int(rng.integers(3))),
            fock.apply_unitary(rho, _random_unitary(rng, 9), [0, 2]),
            fock.partial_trace(rho, [1]),
            fock.measure(rho, povm, [0, 1], rng.random())[1],
            fock.measure_and_discard(rho, povm, [1, 2], rng.random())[1],
        ]
        worst["state"] = max(worst["state"], *(_state_defect(o.data) for o in outs))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= ALGEBRA_TOL and elapsed < ALGEBRA_SECONDS
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (tol {ALGEBRA_TOL:g}); {elapsed:.2f} s"
    report(1, "algebraic suite", ok, detail)


def test_criterion_2_tmsv(report):
    mu = Fraction(1, 10)
    exact_sq = [mu**m / (1 + mu) ** (m + 1) for m in range(2)]
    exact_sq.append(1 - sum(exact_sq))
    assert exact_sq[2] == Fraction(1, 121)
    exact = np.array([math.sqrt(float(v)) for v in exact_sq])
    amps = fock.tmsv_amplitudes(0.1, 2)
    err = float(np.max(np.abs(amps - exact)))
    ok = err <= TMSV_TOL and abs(amps[2] - 1 / 11) <= TMSV_TOL
    report(2, "TMSV amplitudes", ok, f"a = {amps.tolist()}, max |a - brute force| = {err:.1e}")


def test_criterion_3_oracle_equivalence(report):
    start = time.perf_counter()
    base = ExperimentConfig().replace(**LOSSLESS)

    # symmetric case: every heralded state against the pure single-pair state
    oracle = AnalyticOracle.from_mean_photon_numbers(base.mu1, base.mu2)
    literal, extended = [], []
    for trial in range(5):
        for r in run_cycle(Topology(base), trial):
            if r.heralded:
                rho = heralded_memory_state(r)
                literal.append(fock.fidelity_pure(rho, analytic_heralded_state(oracle, r.herald.value)))
                mixture, _ = analytic_heralded_mixture(oracle, r.herald.value)
                extended.append(float(np.max(np.abs(rho.data - mixture.data))))
    literal_ok = min(literal) >= ORACLE_FIDELITY
    parts = [f"(0.1,0.1) pure-state fidelity min {min(literal):.6f} (need {ORACLE_FIDELITY}); "
             f"max |rho - two-pair mixture| {max(extended):.1e}"]

    asym_ok, mixture_ok = True, True
    for mu1, mu2 in ((0.05, 0.2), (0.1, 0.3)):
        point = ex.fidelity_point(base.replace(mu1=mu1, mu2=mu2), ORACLE_HERALDS)
        o = AnalyticOracle.from_mean_photon_numbers(mu1, mu2)
        predicted = effective_fidelity(analytic_heralded_state(o, "plus").to_density().data, "plus")
        with_pairs = effective_fidelity(analytic_heralded_mixture(o, "plus")[0], "plus")
        tol = max(3 * point.stderr, SIGMA_FLOOR)
        asym_ok &= abs(point.fidelity - predicted) <= tol and point.n_heralds >= ORACLE_HERALDS
        mixture_ok &= abs(point.fidelity - with_pairs) <= tol
        parts.append(f"({mu1},{mu2}) F_sim {point.fidelity:.6f} vs pure-state {predicted:.6f}, "
                     f"vs two-pair mixture {with_pairs:.6f} (n={point.n_heralds})")
    elapsed = time.perf_counter() - start
    ok = literal_ok and asym_ok and elapsed < ORACLE_SECONDS
    parts.append(f"two-pair mixture agrees: {mixture_ok and max(extended) < 1e-12}; {elapsed:.1f} s")
    report(3, "oracle equivalence", ok, "; ".join(parts))


def test_criterion_4_hom(report):
    space = FockSpace(1)
    ket = fock.basis_ket(space, (1, 1)).amplitudes
    ideal = (Spd(1.0, 0.0), Spd(1.0, 0.0))
    via_povm = max(
        float(np.real(ket.conj() @ interfering_povm(ideal, 1, math.pi / 4, phi).element((1, 1)) @ ket))
        for phi in (0.0, math.pi, 0.7)
    )
    # brute force: exponentiate the beamsplitter generator on a 5x5 two-mode space
    d = 5
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    A, B = np.kron(a, np.eye(d)), np.kron(np.eye(d), a)
    u = expm((math.pi / 4) * (A.conj().T @ B - A @ B.conj().T))
    psi_in = np.zeros(d * d)
    psi_in[1 * d + 1] = 1.0
    out = (u @ psi_in).reshape(d, d)
    via_state = float(np.sum(np.abs(out[1:, 1:]) ** 2))
    bunched = float(np.abs(out[2, 0]) ** 2 + np.abs(out[0, 2]) ** 2)
    ok = abs(via_povm) <= HOM_TOL and abs(via_state) <= HOM_TOL and abs(bunched - 1) <= HOM_TOL
    report(4, "HOM dip", ok, f"P(coincidence) POVM path {via_povm:.1e}, state evolution {via_state:.1e}")


def test_criterion_5_fidelity_surface(report):
    start = time.perf_counter()
    grid = ex.DEFAULT_MU_GRID
    points = {(p.mu1, p.mu2): p for p in ex.fidelity_sweep(ExperimentConfig(), grid, FIDELITY_HERALDS)}

    def tol(*ps):
        return max(3 * math.sqrt(sum(p.stderr**2 for p in ps)), SIGMA_FLOOR)

    sym = [abs(points[(x, y)].fidelity - points[(y, x)].fidelity) <= tol(points[(x, y)], points[(y, x)])
           for x in grid for y in grid]
    anti = []
    n = len(grid)
    for s in range(0, 2 * n - 1, 2):
        diag = points[(grid[s // 2], grid[s // 2])]
        for i in range(max(0, s - n + 1), min(s, n - 1) + 1):
            other = points[(grid[i], grid[s - i])]
            anti.append(diag.fidelity >= other.fidelity - tol(diag, other))
    diagonal = [points[(x, x)] for x in grid]
    decreasing = [a.fidelity - b.fidelity > tol(a, b) for a, b in zip(diagonal, diagonal[1:])]
    enough = min(p.n_heralds for p in points.values())
    elapsed = time.perf_counter() - start
    ok = all(sym) and all(anti) and all(decreasing) and enough >= FIDELITY_HERALDS and elapsed < DESK_SECONDS
    detail = (f"symmetric {sum(sym)}/{len(sym)}, diagonal max on anti-diagonals {sum(anti)}/{len(anti)}, "
              f"diagonal decreasing {sum(decreasing)}/{len(decreasing)} "
              f"F_diag = {[round(p.fidelity, 4) for p in diagonal]}; min heralds {enough}; {elapsed:.0f} s")
    report(5, "fidelity surface", ok, detail)


def test_criterion_6_rate_vs_modes(report):
    start = time.perf_counter()
    cfg = ExperimentConfig()
    modes, mus = ex.DEFAULT_MODE_NUMBERS, ex.DEFAULT_RATE_MUS
    points = {(p.mode_number, p.mu): p for p in ex.rate_sweep(cfg, modes, mus, RATE_MIN_BINS)}
    r2 = {}
    for mu in mus:
        x = np.array(modes, dtype=float)
        y = np.array([points[(m, mu)].rate_hz for m in modes])
        fit = np.polyval(np.polyfit(x, y, 1), x)
        r2[mu] = 1 - np.sum((y - fit) ** 2) / np.sum((y - y.mean()) ** 2)
    ordered = all(points[(m, lo)].rate_hz < points[(m, hi)].rate_hz for m in modes for lo, hi in zip(mus, mus[1:]))
    default = points[(cfg.memory.mode_number, cfg.mu1)]
    in_band = RATE_BAND_HZ[0] <= default.rate_hz <= RATE_BAND_HZ[1]
    elapsed = time.perf_counter() - start
    ok = min(r2.values()) >= RATE_R2 and ordered and in_band
    detail = (f"R^2 = {{{', '.join(f'{mu}: {v:.4f}' for mu, v in r2.items())}}} (need {RATE_R2}); "
              f"higher mu above at every M: {ordered}; default rate (M={cfg.memory.mode_number}, mu={cfg.mu1}) "
              f"{default.rate_hz:.4g} Hz with p_h {default.p_herald:.4g}, band {RATE_BAND_HZ} Hz: {in_band}; "
              f"{elapsed:.0f} s")
    report(6, "rate vs mode number", ok, detail)


def _d_abs_sigma(res, draws=400, seed=0):
    """Parametric bootstrap of |d| over the click-probability and population errors."""
    rng = np.random.default_rng(seed)
    d = res.diagonal
    samples = []
    for _ in range(draws):
        pts = [InterferencePoint(p.phase, p.detector, float(np.clip(p.click_prob + p.stderr * rng.normal(), 0, 1)),
                                 p.stderr, p.n_samples) for p in res.points]
        v = np.mean([fit_sinusoid([p for p in pts if p.detector == k]).visibility for k in (0, 1)])
        p01 = d.p01 + d.stderr["p01"] * rng.normal()
        p10 = d.p10 + d.stderr["p10"] * rng.normal()
        samples.append(v * (p01 + p10) / 2 / res.reconstruction.normalization)
    return float(np.std(samples))


def test_criterion_7_tomography(report):
    start = time.perf_counter()
    res = ex.tomography(ExperimentConfig(), TOMO_HERALDS, TOMO_PLUS_PER_PHASE)
    rec, oracle = res.reconstruction.rho_tilde, res.oracle
    norm = res.reconstruction.normalization
    sigma = np.zeros((4, 4))
    for i, key in enumerate(("p00", "p01", "p10", "p11")):
        sigma[i, i] = res.diagonal.stderr[key] / norm
    sigma[1, 2] = sigma[2, 1] = _d_abs_sigma(res)
    # the sweep measures |d| only, so compare magnitudes
    diff = np.abs(np.abs(rec) - np.abs(oracle))
    allowed = np.maximum(3 * sigma, TOMO_ELEMENT_TOL)
    elements_ok = bool(np.all(diff <= allowed))
    d_rec = abs(rec[1, 2])
    d_ok = abs(d_rec - res.oracle_d_abs) <= TOMO_D_TOL
    v = res.coherence.visibility
    elapsed = time.perf_counter() - start
    ok = elements_ok and v >= TOMO_VISIBILITY and d_ok and res.n_heralds_diagonal >= 10_000 and elapsed < DESK_SECONDS
    worst = np.unravel_index(np.argmax(diff - allowed), diff.shape)
    detail = (f"max |rec - oracle| {diff.max():.4f}, worst margin at {tuple(int(i) for i in worst)} "
              f"({diff[worst]:.4f} vs {allowed[worst]:.4f}); V {v:.4f} (need {TOMO_VISIBILITY}); "
              f"|d| {d_rec:.4f} vs oracle {res.oracle_d_abs:.4f} (tol {TOMO_D_TOL}); "
              f"heralds {res.n_heralds_diagonal}; {elapsed:.0f} s")
    report(7, "tomography closure", ok, detail)


DETERMINISM_COMMANDS = [
    (["run", "--trials", "20"], ["run.json"]),
    (["fidelity-sweep", "--trials", "10", "--mu-grid", "0.05,0.1"], ["fidelity.csv"]),
    (["rate-sweep", "--trials", "10", "--modes", "1,10,50", "--mus", "0.05,0.1"], ["rate.csv"]),
    (["tomography", "--trials", "10", "--min-plus-per-phase", "50"], ["tomography.json", "interference.csv"]),
]


def test_criterion_8_determinism(report, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"memory": {"mode_number": 50}, "phase_sweep": {"n_steps": 8}}')
    results = []
    for argv, files in DETERMINISM_COMMANDS:
        blobs = []
        for run in ("a", "b"):
            out = tmp_path / argv[0] / run
            assert main(argv + ["--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
            blobs.append([Path(out / f).read_bytes() for f in files])
        results.append((argv[0], blobs[0] == blobs[1]))
    ok = all(same for _, same in results)
    report(8, "determinism", ok, ", ".join(f"{name} {'identical' if same else 'DIFFERS'}" for name, same in results))
