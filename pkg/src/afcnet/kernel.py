"""Discrete-event simulation kernel.

Time is an integer number of picoseconds. Events at equal times run in the
order they were scheduled.
"""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .fock import FockSpace
from .state_manager import QuantumManager

__all__ = ["Event", "Timeline", "Entity", "RngStream", "SchedulingError", "PS_PER_S"]

PS_PER_S = 10**12


class SchedulingError(ValueError):
    pass


@dataclass(order=True)
class Event:
    time: int
    sequence: int = field(default=-1, compare=True)
    action: Callable[..., Any] = field(default=None, compare=False)
    args: tuple = field(default=(), compare=False)

    def execute(self) -> None:
        self.action(*self.args)


class RngStream:
    """Uniform [0, 1) draws from a stream derived from (seed, trial, label)."""

    def __init__(self, seed: int, label: str, trial: int = 0):
        self.label = label
        self._gen = np.random.default_rng([int(seed), int(trial), zlib.crc32(label.encode())])

    def random(self) -> float:
        return float(self._gen.random())

    def __call__(self) -> float:
        return self.random()


class Timeline:
    """Event queue, clock, named random streams and the quantum state store."""

    def __init__(self, seed: int = 0, space: FockSpace | None = None, trial: int = 0):
        self.seed = int(seed)
        self.trial = int(trial)
        self.quantum_manager = QuantumManager(space or FockSpace())
        self.entities: dict[str, Entity] = {}
        self._now = 0
        self._queue: list[tuple[int, int, Event]] = []
        self._sequence = 0
        self._streams: dict[str, RngStream] = {}

    def now(self) -> int:
        return self._now

    def schedule(self, event: Event) -> Event:
        if event.time < self._now:
            raise SchedulingError(f"cannot schedule at t={event.time} ps, clock is at {self._now} ps")
        event.time = int(event.time)
        event.sequence = self._sequence
        self._sequence += 1
        heapq.heappush(self._queue, (event.time, event.sequence, event))
        return event

    def schedule_at(self, time: int, action: Callable[..., Any], *args) -> Event:
        return self.schedule(Event(int(time), action=action, args=args))

    def run_until(self, t_end: float = float("inf")) -> int:
        """Execute every event with time <= ``t_end`` and return how many ran.

        With a finite ``t_end`` the clock ends at ``t_end``; otherwise it rests at
        the last executed event.
        """
        if t_end < self._now:
            raise SchedulingError(f"cannot run back to t={t_end} from {self._now}")
        executed = 0
        queue = self._queue
        while queue and queue[0][0] <= t_end:
            event = heapq.heappop(queue)[2]
            self._now = event.time
            event.execute()
            executed += 1
        if t_end != float("inf"):
            self._now = int(t_end)
        return executed

    def run(self) -> int:
        return self.run_until()

    def pending(self) -> int:
        return len(self._queue)

    def rng_stream(self, label: str) -> RngStream:
        """Named stream; asking twice for one label returns the same stream object."""
        stream = self._streams.get(label)
        if stream is None:
            stream = self._streams[label] = RngStream(self.seed, label, self.trial)
        return stream

    def register(self, entity: "Entity") -> None:
        if entity.name in self.entities:
            raise ValueError(f"duplicate entity name {entity.name!r}")
        self.entities[entity.name] = entity

    def get_entity(self, name: str) -> "Entity":
        return self.entities[name]


class Entity:
    """Timeline-owned component that can receive photons via :meth:`get`."""

    def __init__(self, name: str, timeline: Timeline, receivers: list[str] | None = None):
        self.name = name
        self.timeline = timeline
        self.receivers: list[str] = list(receivers or [])
        timeline.register(self)

    def get(self, photon, source: str | None = None) -> None:
        raise NotImplementedError(f"{type(self).__name__} does not accept photons")

    def forward(self, photon, index: int = 0) -> None:
        self.timeline.get_entity(self.receivers[index]).get(photon, source=self.name)
