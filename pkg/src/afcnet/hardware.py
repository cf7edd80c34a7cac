"""Device models: SPDC source, AFC memory, fibers, detectors, BSM and state detectors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np

from . import fock
from .fock import FockSpace, Povm
from .kernel import PS_PER_S, Entity, Timeline

__all__ = [
    "SPEED_OF_LIGHT",
    "Photon",
    "Herald",
    "SpdcSource",
    "AfcMemory",
    "FiberChannel",
    "ClassicalChannel",
    "Spd",
    "BsmStation",
    "Qsd",
    "fiber_loss",
    "fiber_delay_ps",
    "interfering_povm",
    "direct_povm",
]

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass
class Photon:
    """Handle travelling between entities; the quantum state lives in the manager under ``key``."""

    key: int
    temporal_bin: int
    origin: str
    emit_time: int


class Herald(str, Enum):
    NONE = "none"
    PLUS = "plus"
    MINUS = "minus"
    DOUBLE = "double"

    BOTH = "double"

    @property
    def heralded(self) -> bool:
        return self in (Herald.PLUS, Herald.MINUS)


_CLICK_PATTERN = {(0, 0): Herald.NONE, (1, 0): Herald.PLUS, (0, 1): Herald.MINUS, (1, 1): Herald.DOUBLE}


@lru_cache(maxsize=64)
def _tmsv(mu: float, truncation: int) -> fock.DensityMatrix:
    return fock.tmsv_ket(mu, FockSpace(truncation)).to_density()


def _period_ps(frequency: float) -> int:
    return int(round(PS_PER_S / frequency))


class SpdcSource(Entity):
    """Emits two-mode squeezed vacuum pairs; receivers are [signal, idler]."""

    def __init__(self, name: str, timeline: Timeline, mu: float, frequency: float,
                 signal_receiver: str, idler_receiver: str):
        if mu < 0:
            raise ValueError(f"mean photon number must be non-negative, got {mu}")
        if frequency <= 0:
            raise ValueError(f"source frequency must be positive, got {frequency}")
        super().__init__(name, timeline, [signal_receiver, idler_receiver])
        self.mu = float(mu)
        self.frequency = float(frequency)
        self.emitted: dict[int, tuple[int, int, int]] = {}

    @property
    def period_ps(self) -> int:
        return _period_ps(self.frequency)

    def emit(self, temporal_bin: int) -> tuple[int, int]:
        qm = self.timeline.quantum_manager
        signal, idler = qm.allocate_vacuum(), qm.allocate_vacuum()
        qm.set_entangled((signal, idler), _tmsv(self.mu, qm.space.truncation))
        now = self.timeline.now()
        self.emitted[temporal_bin] = (signal, idler, now)
        self.forward(Photon(signal, temporal_bin, self.name, now), 0)
        self.forward(Photon(idler, temporal_bin, self.name, now), 1)
        return signal, idler

    def emit_train(self, n_pulses: int, start: int | None = None) -> None:
        """Schedule ``n_pulses`` emissions spaced by one source period."""
        start = self.timeline.now() if start is None else start
        for b in range(n_pulses):
            self.timeline.schedule_at(start + b * self.period_ps, self.emit, b)


class AfcMemory(Entity):
    """Multimode absorptive memory with automatic re-emission.

    Each absorbed photon passes through a loss channel with transmission
    ``absorption_efficiency`` and is re-emitted ``storage_time`` after
    absorption (or in mirrored order when ``reemission_order='reversed'``),
    passing a second loss channel with transmission ``retrieval_efficiency``.
    """

    def __init__(self, name: str, timeline: Timeline, mode_number: int, frequency: float,
                 absorption_efficiency: float, retrieval_efficiency: float = 1.0,
                 storage_time: int | None = None, reemission_order: str = "same",
                 receivers: list[str] | None = None):
        if mode_number < 1:
            raise ValueError("memory needs at least one temporal mode")
        for label, eff in (("absorption", absorption_efficiency), ("retrieval", retrieval_efficiency)):
            if not 0.0 <= eff <= 1.0:
                raise ValueError(f"{label} efficiency must lie in [0, 1], got {eff}")
        if reemission_order not in ("same", "reversed"):
            raise ValueError(f"unknown re-emission order {reemission_order!r}")
        super().__init__(name, timeline, receivers)
        self.mode_number = int(mode_number)
        self.frequency = float(frequency)
        self.absorption_efficiency = float(absorption_efficiency)
        self.retrieval_efficiency = float(retrieval_efficiency)
        self.storage_time = self.mode_number * self.period_ps if storage_time is None else int(storage_time)
        self.reemission_order = reemission_order
        self.stored: dict[int, Photon] = {}
        self.emission_log: list[int] = []

    @property
    def period_ps(self) -> int:
        return _period_ps(self.frequency)

    def get(self, photon: Photon, source: str | None = None) -> None:
        self.absorb(photon)

    def absorb(self, photon: Photon) -> bool:
        b = photon.temporal_bin
        if not 0 <= b < self.mode_number:
            log.warning("%s: temporal bin %d outside %d modes, photon dropped", self.name, b, self.mode_number)
            return False
        if b in self.stored:
            raise ValueError(f"{self.name}: temporal bin {b} already occupied")
        qm = self.timeline.quantum_manager
        if self.absorption_efficiency < 1.0:
            qm.apply_channel_at(photon.key, fock.gad_channel(1.0 - self.absorption_efficiency, qm.space))
        self.stored[b] = photon
        now = self.timeline.now()
        if self.reemission_order == "same":
            t = now + self.storage_time
        else:
            t = now + self.storage_time + (self.mode_number - 1 - 2 * b) * self.period_ps
        self.timeline.schedule_at(t, self.reemit, b)
        return True

    def reemit(self, temporal_bin: int) -> int:
        try:
            photon = self.stored.pop(temporal_bin)
        except KeyError:
            raise ValueError(f"{self.name}: temporal bin {temporal_bin} is empty") from None
        qm = self.timeline.quantum_manager
        if self.retrieval_efficiency < 1.0:
            qm.apply_channel_at(photon.key, fock.gad_channel(1.0 - self.retrieval_efficiency, qm.space))
        self.emission_log.append(temporal_bin)
        if self.receivers:
            self.forward(photon)
        return photon.key


def fiber_loss(length_km: float, attenuation_db_per_km: float) -> float:
    """Single-photon loss probability of a fiber."""
    return 1.0 - 10.0 ** (-attenuation_db_per_km * length_km / 10.0)


def fiber_delay_ps(length_km: float, refractive_index: float) -> int:
    return int(round(length_km * 1e3 * refractive_index / SPEED_OF_LIGHT * PS_PER_S))


class FiberChannel(Entity):
    """Lossy, delaying optical fiber delivering photons to one receiver."""

    def __init__(self, name: str, timeline: Timeline, receiver: str, length_km: float,
                 attenuation_db_per_km: float = 0.2, refractive_index: float = 1.47):
        if length_km < 0 or attenuation_db_per_km < 0 or refractive_index <= 0:
            raise ValueError("fiber length and attenuation must be non-negative, index positive")
        super().__init__(name, timeline, [receiver])
        self.length_km = float(length_km)
        self.attenuation = float(attenuation_db_per_km)
        self.refractive_index = float(refractive_index)

    @property
    def loss(self) -> float:
        return fiber_loss(self.length_km, self.attenuation)

    @property
    def delay(self) -> int:
        return fiber_delay_ps(self.length_km, self.refractive_index)

    def get(self, photon: Photon, source: str | None = None) -> None:
        self.transmit(photon)

    def transmit(self, photon: Photon) -> None:
        qm = self.timeline.quantum_manager
        if self.loss > 0.0:
            qm.apply_channel_at(photon.key, fock.gad_channel(self.loss, qm.space))
        self.timeline.schedule_at(self.timeline.now() + self.delay, self.forward, photon)


class ClassicalChannel(Entity):
    """Delivers messages to ``receiver.receive_message(source, message)`` after ``delay`` ps."""

    def __init__(self, name: str, timeline: Timeline, receiver: str, delay: int):
        if delay <= 0:
            raise ValueError("classical delay must be positive")
        super().__init__(name, timeline, [receiver])
        self.delay = int(delay)

    def send(self, message) -> None:
        target = self.timeline.get_entity(self.receivers[0])
        self.timeline.schedule_at(self.timeline.now() + self.delay, target.receive_message, self.name, message)


@dataclass(frozen=True)
class Spd:
    """Non-number-resolving single photon detector."""

    efficiency: float = 0.6
    dark_count_rate: float = 0.0
    time_window: int = 20_000

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"detector efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dark_count_rate < 0 or self.time_window < 0:
            raise ValueError("dark count rate and time window must be non-negative")

    @property
    def p_dark(self) -> float:
        return -math.expm1(-self.dark_count_rate * self.time_window / PS_PER_S)

    def povm(self, space: FockSpace) -> Povm:
        return fock.with_dark_counts(fock.detector_povm(self.efficiency, space), self.p_dark)


@lru_cache(maxsize=64)
def interfering_povm(detectors: tuple[Spd, Spd], truncation: int, theta: float, phi: float) -> Povm:
    """Joint click POVM of two detectors behind a beamsplitter, pulled back to the inputs."""
    big = FockSpace(2 * truncation)
    out = fock.product_povm(detectors[0].povm(big), detectors[1].povm(big))
    return fock.transform_povm_through_bs(out, theta, phi, FockSpace(truncation))


@lru_cache(maxsize=64)
def direct_povm(detectors: tuple[Spd, Spd], truncation: int) -> Povm:
    space = FockSpace(truncation)
    return fock.product_povm(detectors[0].povm(space), detectors[1].povm(space))


def _clicks(label) -> tuple[bool, bool]:
    return bool(label[0]), bool(label[1])


class _PairedReceiver(Entity):
    """Collects one photon per input port and temporal bin before measuring them together."""

    def __init__(self, name: str, timeline: Timeline, space: FockSpace, detectors: tuple[Spd, Spd]):
        super().__init__(name, timeline)
        self.space = space
        self.detectors = tuple(detectors)
        self.ports: dict[str, int] = {}
        self.listeners: list[Callable] = []
        self._pending: dict[int, list] = {}

    def connect(self, source: str, port: int) -> None:
        if port not in (0, 1) or port in self.ports.values():
            raise ValueError(f"port {port} unavailable")
        self.ports[source] = port

    def get(self, photon: Photon, source: str | None = None) -> None:
        slot = self._pending.setdefault(photon.temporal_bin, [None, None])
        slot[self.ports[source]] = photon
        if slot[0] is not None and slot[1] is not None:
            del self._pending[photon.temporal_bin]
            self._on_pair(photon.temporal_bin, slot[0], slot[1])

    def _on_pair(self, temporal_bin: int, first: Photon, second: Photon) -> None:
        raise NotImplementedError


@lru_cache(maxsize=256)
def _phase_unitary(phase: float, dim: int) -> np.ndarray:
    u = np.diag(np.exp(1j * phase * np.arange(dim)))
    u.flags.writeable = False
    return u


class BsmStation(_PairedReceiver):
    """50/50 beamsplitter followed by two detectors, used to herald memory-memory entanglement.

    The beamsplitter phase is pi, so a click on detector 1 alone heralds
    (|01> + |10>)/sqrt(2) between the memories feeding ports 0 and 1 and a
    click on detector 2 alone heralds the minus state.
    """

    def __init__(self, name: str, timeline: Timeline, space: FockSpace, detectors: tuple[Spd, Spd],
                 theta: float = math.pi / 4, phi: float = math.pi, delta_phi: float = 0.0):
        super().__init__(name, timeline, space, detectors)
        self.theta = theta
        self.phi = phi
        self.delta_phi = delta_phi

    @property
    def joint_povm(self) -> Povm:
        return interfering_povm(self.detectors, self.space.truncation, self.theta, self.phi)

    def bsm_measure(self, key_1: int, key_2: int, draw: float) -> Herald:
        qm = self.timeline.quantum_manager
        if key_1 not in qm or key_2 not in qm:
            raise KeyError(f"BSM input photon missing from state manager ({key_1}, {key_2})")
        if self.delta_phi:
            qm.apply_unitary_at(key_2, _phase_unitary(self.delta_phi, self.space.dim))
        label = qm.measure_at([key_1, key_2], self.joint_povm, draw)
        return _CLICK_PATTERN[label]

    def _on_pair(self, temporal_bin, first, second):
        draw = self.timeline.rng_stream(f"{self.name}.detect").random()
        outcome = self.bsm_measure(first.key, second.key, draw)
        for listener in self.listeners:
            listener(temporal_bin, outcome)


class Qsd(_PairedReceiver):
    """Two-detector state analyser in ``diagonal`` or ``coherence`` configuration.

    The coherence configuration shifts the port-0 mode by ``phase`` (fiber
    stretcher) and interferes both modes on a 50/50 beamsplitter with the
    BSM's phase convention, so the plus Bell state exits at detector 1 when
    the stretcher phase is zero.
    """

    def __init__(self, name: str, timeline: Timeline, space: FockSpace, detectors: tuple[Spd, Spd],
                 configuration: str = "diagonal", phase: float = 0.0):
        if configuration not in ("diagonal", "coherence"):
            raise ValueError(f"unknown QSD configuration {configuration!r}")
        super().__init__(name, timeline, space, detectors)
        self.configuration = configuration
        self.phase = float(phase)

    @property
    def joint_povm(self) -> Povm:
        if self.configuration == "diagonal":
            return direct_povm(self.detectors, self.space.truncation)
        return interfering_povm(self.detectors, self.space.truncation, math.pi / 4, math.pi)

    def qsd_measure(self, key_1: int, key_2: int, draw: float) -> tuple[bool, bool]:
        qm = self.timeline.quantum_manager
        if self.configuration == "coherence" and self.phase:
            qm.apply_unitary_at(key_1, _phase_unitary(self.phase, self.space.dim))
        return _clicks(qm.measure_at([key_1, key_2], self.joint_povm, draw))

    def _on_pair(self, temporal_bin, first, second):
        draw = self.timeline.rng_stream(f"{self.name}.detect").random()
        clicks = self.qsd_measure(first.key, second.key, draw)
        for listener in self.listeners:
            listener(temporal_bin, clicks)
