"""Heralded entanglement generation between two AFC memories.

Two memory nodes each hold an SPDC source and an AFC memory. Idler photons
travel through equal-length fibers to a measurement node, where a 50/50
beamsplitter and two detectors perform the Bell state measurement. The
outcome of every temporal bin is sent back to both memory nodes. Optionally
the re-emitted signal photons are fibered to a state detector at the
measurement node for tomography.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import ExperimentConfig
from .fock import DensityMatrix, FockSpace
from .hardware import (
    AfcMemory,
    BsmStation,
    ClassicalChannel,
    FiberChannel,
    Herald,
    Qsd,
    Spd,
    SpdcSource,
    fiber_delay_ps,
)
from .kernel import PS_PER_S, Entity, Timeline

__all__ = [
    "Topology",
    "TrialRecord",
    "CycleTiming",
    "MemoryNode",
    "build_timeline",
    "run_cycle",
    "run_trials",
    "heralded_memory_state",
    "estimate_herald_probability",
]


@dataclass(frozen=True)
class Topology:
    """Three-node layout: two memory nodes and one measurement node.

    ``measurement`` selects what happens to re-emitted signal photons: ``None``
    leaves them unmeasured, ``"diagonal"`` or ``"coherence"`` routes them to a
    state detector (with stretcher ``phase`` for coherence).
    """

    config: ExperimentConfig = field(default_factory=ExperimentConfig)
    memory_nodes: tuple[str, str] = ("ANL", "HC")
    measure_node: str = "ERC"
    fiber_lengths_km: tuple[float, float] | None = None
    measurement: str | None = None
    phase: float = 0.0

    def __post_init__(self):
        if self.fiber_lengths_km is None:
            length = self.config.fiber.length_km
            object.__setattr__(self, "fiber_lengths_km", (length, length))
        a, b = self.fiber_lengths_km
        if a != b:
            raise ValueError(f"idler fibers must have equal length, got {a} and {b} km")
        if self.measurement not in (None, "diagonal", "coherence"):
            raise ValueError(f"unknown measurement configuration {self.measurement!r}")
        if len(set(self.memory_nodes) | {self.measure_node}) != 3:
            raise ValueError("node names must be distinct")

    @property
    def space(self) -> FockSpace:
        return FockSpace(self.config.truncation)

    @property
    def pulses(self) -> int:
        return self.config.memory.mode_number

    @property
    def timing(self) -> "CycleTiming":
        delay = fiber_delay_ps(self.fiber_lengths_km[0], self.config.fiber.refractive_index) / PS_PER_S
        return CycleTiming(self.pulses, self.config.frequency_hz, delay, delay)

    def detector(self) -> Spd:
        cfg = self.config
        window = cfg.detectors.window_ps
        if window is None:
            window = int(round(PS_PER_S / cfg.frequency_hz))
        return Spd(cfg.detectors.efficiency, cfg.detectors.dark_count_hz, window)


@dataclass(frozen=True)
class CycleTiming:
    """Duration of one generation cycle; delays in seconds."""

    mode_number: int
    frequency: float
    tau_ph: float
    tau_c: float

    def __post_init__(self):
        if self.mode_number < 1 or self.frequency <= 0 or self.tau_ph < 0 or self.tau_c < 0:
            raise ValueError("invalid cycle timing")

    @property
    def period(self) -> float:
        return self.mode_number / self.frequency + self.tau_ph + self.tau_c


@dataclass
class TrialRecord:
    trial_index: int
    temporal_bin: int
    emission_time: int
    memory_state_keys: tuple[int, int]
    herald: Herald = Herald.NONE
    bsm_time: int | None = None
    herald_time: int | None = None
    memory_state: DensityMatrix | None = None
    clicks: tuple[bool, bool] | None = None

    @property
    def heralded(self) -> bool:
        return self.herald.heralded


class MemoryNode(Entity):
    """Receives BSM results and stamps the arrival time on the matching record."""

    def __init__(self, name: str, timeline: Timeline, records: dict[int, TrialRecord]):
        super().__init__(name, timeline)
        self.records = records
        self.messages: list[tuple[int, Herald]] = []

    def receive_message(self, source: str, message: tuple[int, Herald]) -> None:
        temporal_bin, outcome = message
        self.messages.append(message)
        record = self.records[temporal_bin]
        if record.herald_time is None:
            record.herald_time = self.timeline.now()


def build_timeline(topology: Topology, trial_index: int = 0):
    """Wire up one cycle's entities; returns (timeline, records, sources)."""
    cfg = topology.config
    if topology.pulses > cfg.memory.mode_number:
        raise ValueError(f"{topology.pulses} pulses exceed {cfg.memory.mode_number} memory modes")
    tl = Timeline(seed=cfg.seed, space=topology.space, trial=trial_index)
    space = topology.space
    det = topology.detector()
    names = topology.memory_nodes
    hub = topology.measure_node
    records: dict[int, TrialRecord] = {}

    bsm = BsmStation(f"{hub}.bsm", tl, space, (det, det), delta_phi=cfg.delta_phi)
    qsd = None
    if topology.measurement is not None:
        qsd = Qsd(f"{hub}.qsd", tl, space, (det, det), topology.measurement, topology.phase)

    sources = []
    delay = fiber_delay_ps(topology.fiber_lengths_km[0], cfg.fiber.refractive_index)
    storage = cfg.memory.storage_time_ps
    if storage is None and qsd is not None:
        # hold photons until their herald has arrived, so the stored state read at
        # herald time is not yet affected by the detection path
        storage = topology.pulses * int(round(PS_PER_S / cfg.frequency_hz)) + 2 * delay
    for port, (node, mu) in enumerate(zip(names, (cfg.mu1, cfg.mu2))):
        MemoryNode(node, tl, records)
        mem_out = [f"{node}.qsd_fiber"] if qsd is not None else []
        AfcMemory(f"{node}.memory", tl, cfg.memory.mode_number, cfg.frequency_hz,
                  cfg.memory.eta_abs, cfg.memory.eta_ret, storage,
                  cfg.memory.reemission_order, receivers=mem_out)
        idler_fiber = FiberChannel(f"{node}.idler_fiber", tl, bsm.name, topology.fiber_lengths_km[port],
                                   cfg.fiber.attenuation_db_per_km, cfg.fiber.refractive_index)
        bsm.connect(idler_fiber.name, port)
        if qsd is not None:
            qfiber = FiberChannel(f"{node}.qsd_fiber", tl, qsd.name, topology.fiber_lengths_km[port],
                                  cfg.fiber.attenuation_db_per_km, cfg.fiber.refractive_index)
            qsd.connect(qfiber.name, port)
        ClassicalChannel(f"{hub}->{node}", tl, node, delay)
        sources.append(SpdcSource(f"{node}.spdc", tl, mu, cfg.frequency_hz, f"{node}.memory", idler_fiber.name))

    def on_bsm(temporal_bin: int, outcome: Herald) -> None:
        if temporal_bin not in records:
            s1, _, t1 = sources[0].emitted[temporal_bin]
            s2, _, _ = sources[1].emitted[temporal_bin]
            records[temporal_bin] = TrialRecord(trial_index, temporal_bin, t1, (s1, s2))
        record = records[temporal_bin]
        record.herald = outcome
        record.bsm_time = tl.now()
        if outcome.heralded:
            # direct (simulator-level) access to the stored modes
            record.memory_state = tl.quantum_manager.get_state(record.memory_state_keys)
        for node in names:
            tl.get_entity(f"{hub}->{node}").send((temporal_bin, outcome))

    def on_qsd(temporal_bin: int, clicks: tuple[bool, bool]) -> None:
        records[temporal_bin].clicks = clicks

    bsm.listeners.append(on_bsm)
    if qsd is not None:
        qsd.listeners.append(on_qsd)
    for src in sources:
        src.emit_train(topology.pulses, start=0)
    return tl, records, sources


def run_cycle(topology: Topology, trial_index: int = 0) -> list[TrialRecord]:
    """Run one full cycle of ``M`` temporal bins and return one record per bin."""
    tl, records, _ = build_timeline(topology, trial_index)
    tl.run()
    missing = set(range(topology.pulses)) - set(records)
    if missing:
        raise RuntimeError(f"no BSM result for bins {sorted(missing)}")
    return [records[b] for b in range(topology.pulses)]


def run_trials(topology: Topology, n_trials: int, start: int = 0) -> Iterable[TrialRecord]:
    """Records of trials ``start .. start+n_trials-1``, in trial order."""
    for i in range(start, start + n_trials):
        yield from run_cycle(topology, i)


def heralded_memory_state(record: TrialRecord) -> DensityMatrix:
    if not record.heralded or record.memory_state is None:
        raise ValueError(f"bin {record.temporal_bin} of trial {record.trial_index} was not heralded")
    return record.memory_state


def estimate_herald_probability(records: Sequence[TrialRecord]) -> tuple[float, float]:
    """Fraction of heralded bins and its binomial standard error."""
    n = len(records)
    if n == 0:
        raise ValueError("no records")
    p = sum(r.heralded for r in records) / n
    return p, float(np.sqrt(p * (1.0 - p) / n))
