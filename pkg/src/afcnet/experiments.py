"""Experiment drivers: single run, fidelity sweep, rate sweep and simulated tomography.

Trials run sequentially; trial ``i`` draws from streams keyed by ``(seed, i)``,
so results depend only on the configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .analysis import (
    CoherenceEstimate,
    DiagonalEstimate,
    EffectiveState,
    InterferencePoint,
    assemble_reconstruction,
    effective_fidelity,
    generation_rate,
    qubit_sector,
    tomography_coherence,
    tomography_diagonal,
)
from .config import ExperimentConfig
from .fock import DensityMatrix
from .hardware import Herald, fiber_loss
from .protocol import Topology, TrialRecord, run_cycle

__all__ = [
    "RunSummary",
    "FidelityPoint",
    "RatePoint",
    "TomographyResult",
    "iterate_cycles",
    "run_experiment",
    "fidelity_point",
    "fidelity_sweep",
    "rate_point",
    "rate_sweep",
    "path_transmission",
    "tomography",
    "DEFAULT_MU_GRID",
    "DEFAULT_MODE_NUMBERS",
    "DEFAULT_RATE_MUS",
]

DEFAULT_MU_GRID = (0.05, 0.1, 0.15, 0.2)
DEFAULT_MODE_NUMBERS = (1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
DEFAULT_RATE_MUS = (0.05, 0.1, 0.2)


MAX_CYCLE_FACTOR = 10_000


def iterate_cycles(topology: Topology, trials: int, min_count: int | None = None,
                   count: Callable[[TrialRecord], bool] = lambda r: r.heralded) -> Iterable[list[TrialRecord]]:
    """Yield the records of successive cycles.

    Runs at least ``trials`` cycles, and keeps going until ``min_count``
    records satisfy ``count`` when that is given. Gives up with
    ``RuntimeError`` after ``MAX_CYCLE_FACTOR * trials`` cycles.
    """
    counted, i = 0, 0
    while i < trials or (min_count is not None and counted < min_count):
        if i >= MAX_CYCLE_FACTOR * trials:
            raise RuntimeError(f"only {counted} of {min_count} records after {i} cycles")
        records = run_cycle(topology, i)
        counted += sum(1 for r in records if count(r))
        yield records
        i += 1


class _FidelityCache:
    # heralded states are shared objects, so their fidelity is computed once
    def __init__(self):
        self._data: dict[tuple[int, str], tuple[float, object]] = {}

    def __call__(self, record: TrialRecord) -> float:
        key = (id(record.memory_state), record.herald.value)
        hit = self._data.get(key)
        if hit is None:
            hit = self._data[key] = (effective_fidelity(record.memory_state, record.herald.value), record.memory_state)
        return hit[0]


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


@dataclass(frozen=True)
class RunSummary:
    n_trials: int
    n_bins: int
    n_heralds: int
    n_plus: int
    n_minus: int
    p_herald: float
    p_herald_stderr: float
    fidelity: float
    fidelity_stderr: float
    tau_ph: float
    tau_c: float
    rate_hz: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_experiment(config: ExperimentConfig, min_heralds: int | None = None) -> RunSummary:
    """Herald statistics, mean effective fidelity and rate for one configuration."""
    topology = Topology(config)
    fid = _FidelityCache()
    n_trials = n_bins = n_plus = n_minus = 0
    fidelities: list[float] = []
    for records in iterate_cycles(topology, config.trials, min_heralds):
        n_trials += 1
        n_bins += len(records)
        for r in records:
            if r.heralded:
                n_plus += r.herald is Herald.PLUS
                n_minus += r.herald is Herald.MINUS
                fidelities.append(fid(r))
    n_heralds = n_plus + n_minus
    p = n_heralds / n_bins
    f, f_err = _mean_stderr(fidelities)
    timing = topology.timing
    rate = generation_rate(timing.mode_number, timing.frequency, p, timing.tau_ph, timing.tau_c)
    return RunSummary(n_trials, n_bins, n_heralds, n_plus, n_minus, p, math.sqrt(p * (1 - p) / n_bins),
                      f, f_err, timing.tau_ph, timing.tau_c, rate)


@dataclass(frozen=True)
class FidelityPoint:
    mu1: float
    mu2: float
    fidelity: float
    stderr: float
    n_heralds: int
    n_bins: int


def fidelity_point(config: ExperimentConfig, min_heralds: int | None = None) -> FidelityPoint:
    s = run_experiment(config, min_heralds)
    return FidelityPoint(config.mu1, config.mu2, s.fidelity, s.fidelity_stderr, s.n_heralds, s.n_bins)


def fidelity_sweep(config: ExperimentConfig, mu_grid: Sequence[float] = DEFAULT_MU_GRID,
                   min_heralds: int | None = None) -> list[FidelityPoint]:
    """Mean effective fidelity on the grid mu_grid x mu_grid (mu1 varies slowest)."""
    return [fidelity_point(config.replace(mu1=float(a), mu2=float(b)), min_heralds)
            for a in mu_grid for b in mu_grid]


@dataclass(frozen=True)
class RatePoint:
    mode_number: int
    mu: float
    p_herald: float
    p_herald_stderr: float
    rate_hz: float
    n_bins: int


def rate_point(config: ExperimentConfig, mode_number: int, mu: float, min_bins: int | None = None) -> RatePoint:
    """Herald probability and rate with ``mode_number`` bins per cycle and mu1 = mu2 = mu."""
    cfg = config.replace(mu1=float(mu), mu2=float(mu), **{"memory.mode_number": int(mode_number)})
    trials = cfg.trials if min_bins is None else max(cfg.trials, math.ceil(min_bins / mode_number))
    s = run_experiment(cfg.replace(trials=trials))
    return RatePoint(int(mode_number), float(mu), s.p_herald, s.p_herald_stderr, s.rate_hz, s.n_bins)


def rate_sweep(config: ExperimentConfig, mode_numbers: Sequence[int] = DEFAULT_MODE_NUMBERS,
               mus: Sequence[float] = DEFAULT_RATE_MUS, min_bins: int | None = None) -> list[RatePoint]:
    return [rate_point(config, m, mu, min_bins) for mu in mus for m in mode_numbers]


# -- tomography ----------------------------------------------------------------


def path_transmission(config: ExperimentConfig) -> float:
    """Retrieval, fiber and detector efficiency of one memory-to-detector path."""
    fiber = config.fiber
    return config.memory.eta_ret * (1.0 - fiber_loss(fiber.length_km, fiber.attenuation_db_per_km)) * config.detectors.efficiency


@dataclass
class TomographyResult:
    diagonal: DiagonalEstimate
    coherence: CoherenceEstimate
    points: list[InterferencePoint]
    reconstruction: EffectiveState
    oracle: np.ndarray  # mean directly accessed plus-herald state, sector-restricted and renormalized
    oracle_sector_weight: float
    eta_tot: float
    p_dark: float
    n_heralds_diagonal: int
    n_bins_diagonal: int
    d_abs_uncorrected: float
    n_plus_per_phase: list[int] = field(default_factory=list)

    @property
    def oracle_d_abs(self) -> float:
        return float(abs(self.oracle[1, 2]))


def _interference_points(config: ExperimentConfig, phase: float, min_plus: int | None) -> list[InterferencePoint]:
    trials = config.phase_sweep.trials_per_phase or config.trials
    topology = Topology(config, measurement="coherence", phase=phase)
    plus = lambda r: r.herald is Herald.PLUS
    clicks = [r.clicks for records in iterate_cycles(topology, trials, min_plus, plus) for r in records if plus(r)]
    arr = np.asarray(clicks, dtype=float).reshape(-1, 2)
    n = len(arr)
    if n == 0:
        raise RuntimeError(f"no plus heralds at phase {phase:.4g}; increase trials")
    p = arr.mean(axis=0)
    err = np.sqrt(p * (1 - p) / n)
    return [InterferencePoint(float(phase), d, float(p[d]), float(err[d]), n) for d in (0, 1)]


def tomography(config: ExperimentConfig, min_heralds: int | None = None,
               min_plus_per_phase: int | None = None) -> TomographyResult:
    """Diagonal run on all heralds, then a phase sweep of the coherence configuration.

    The sweep is conditioned on plus heralds, and the oracle is the plus-herald
    memory state read directly from the simulation.
    """
    topology = Topology(config, measurement="diagonal")
    clicks: list[tuple[bool, bool]] = []
    plus_sum, n_plus, n_bins = None, 0, 0
    for records in iterate_cycles(topology, config.trials, min_heralds):
        n_bins += len(records)
        for r in records:
            if not r.heralded:
                continue
            clicks.append(r.clicks)
            if r.herald is Herald.PLUS:
                plus_sum = r.memory_state.data if plus_sum is None else plus_sum + r.memory_state.data
                n_plus += 1
    if not clicks or n_plus == 0:
        raise RuntimeError("no heralds in the diagonal run; increase trials")
    eta = path_transmission(config)
    p_dark = topology.detector().p_dark
    diag = tomography_diagonal(np.asarray(clicks), (eta, eta), (p_dark, p_dark))

    mean_plus = DensityMatrix(topology.space, 2, plus_sum / n_plus)
    oracle, weight = qubit_sector(mean_plus)

    phases = np.linspace(0.0, 2.0 * np.pi, config.phase_sweep.n_steps, endpoint=False)
    points: list[InterferencePoint] = []
    for phase in phases:
        points.extend(_interference_points(config, float(phase), min_plus_per_phase))
    coh = tomography_coherence(points, diag.p01, diag.p10)
    recon = assemble_reconstruction(diag.p00, diag.p01, diag.p10, diag.p11, coh.d_abs)
    d_raw = coh.visibility * (diag.raw["click_1"] + diag.raw["click_2"]) / 2.0
    per_phase = [p.n_samples for p in points if p.detector == 0]
    return TomographyResult(diag, coh, points, recon, oracle, weight, eta, p_dark, len(clicks), n_bins, d_raw, per_phase)
