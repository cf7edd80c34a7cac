import numpy as np
import pytest

from afcnet.kernel import Entity, Event, RngStream, SchedulingError, Timeline


def test_fifo_at_equal_times():
    tl = Timeline()
    order = []
    for name in "abc":
        tl.schedule_at(10, order.append, name)
    tl.schedule_at(5, order.append, "first")
    assert tl.run() == 4
    assert order == ["first", "a", "b", "c"]


def test_run_until_bounds():
    tl = Timeline()
    seen = []
    for t in (5, 10, 15):
        tl.schedule_at(t, seen.append, t)
    assert tl.run_until(10) == 2
    assert tl.now() == 10 and seen == [5, 10] and tl.pending() == 1
    assert tl.run() == 1 and tl.now() == 15


def test_empty_queue_advances_clock():
    tl = Timeline()
    assert tl.run_until(1234) == 0
    assert tl.now() == 1234


def test_past_scheduling_rejected():
    tl = Timeline()
    tl.run_until(100)
    with pytest.raises(SchedulingError):
        tl.schedule_at(99, print)
    with pytest.raises(SchedulingError):
        tl.run_until(50)


def test_events_scheduled_during_execution():
    tl = Timeline()
    seen = []

    def chain(n):
        seen.append((tl.now(), n))
        if n < 3:
            tl.schedule_at(tl.now(), chain, n + 1)

    tl.schedule_at(7, chain, 0)
    tl.run()
    assert seen == [(7, 0), (7, 1), (7, 2), (7, 3)]


def test_event_object_scheduling():
    tl = Timeline()
    out = []
    ev = tl.schedule(Event(3, action=out.append, args=("x",)))
    assert ev.sequence == 0
    tl.run()
    assert out == ["x"]


def test_rng_streams():
    a = [RngStream(5, "detector").random() for _ in range(1)]
    s1, s2 = RngStream(5, "detector"), RngStream(5, "detector")
    x = [s1.random() for _ in range(100)]
    assert x == [s2.random() for _ in range(100)]
    other = RngStream(5, "source")
    assert x != [other.random() for _ in range(100)]
    assert all(0.0 <= v < 1.0 for v in x) and a[0] == x[0]
    assert x != [RngStream(6, "detector").random() for _ in range(100)]


def test_timeline_stream_is_cached():
    tl = Timeline(seed=3)
    assert tl.rng_stream("a") is tl.rng_stream("a")
    assert tl.rng_stream("a").random() == RngStream(3, "a").random()


def test_entity_wiring():
    tl = Timeline()

    class Sink(Entity):
        def __init__(self, *args):
            super().__init__(*args)
            self.got = []

        def get(self, photon, source=None):
            self.got.append((photon, source))

    sink = Sink("sink", tl)
    src = Entity("src", tl, ["sink"])
    src.forward("p")
    assert sink.got == [("p", "src")]
    with pytest.raises(ValueError):
        Entity("sink", tl)
    with pytest.raises(NotImplementedError):
        src.get("p")


def test_picosecond_times_stay_integer():
    tl = Timeline()
    tl.schedule_at(1.0e12 + 0.4, lambda: None)
    tl.run()
    assert isinstance(tl.now(), int) and tl.now() == 10**12
