"""Discrete-event kernel: integer-picosecond time, clock domains, tracing and
the two-flop clock-domain-crossing model everything else runs on."""

from __future__ import annotations

import enum
import heapq
import itertools
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Optional

import xxhash

__all__ = [
    "SimTime", "SimulationError", "ScheduledEvent", "Simulator", "ClockDomain",
    "next_edge", "cdc_synchronize", "Synchronizer", "Clock", "TraceKind",
    "TraceRecord", "Trace", "DEFAULT_PERIOD_PS",
]

SimTime = int

# 25 MHz board clock
DEFAULT_PERIOD_PS = 40_000


class SimulationError(RuntimeError):
    """A model invariant was broken. Always a bug, never a workload condition."""


@dataclass(eq=False)
class ScheduledEvent:
    fire_at: SimTime
    seq: int
    target: str
    payload: Any = None
    action: Optional[Callable[[], Any]] = None
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True

    def __lt__(self, other: "ScheduledEvent") -> bool:
        return (self.fire_at, self.seq) < (other.fire_at, other.seq)


class TraceKind(str, enum.Enum):
    STATE = "state-change"
    FLIT = "flit-transfer"
    HANDSHAKE = "handshake-edge"
    WB = "wb-edge"
    DROP = "drop"
    RETRANSMIT = "retransmit"


@dataclass(frozen=True, slots=True)
class TraceRecord:
    time: SimTime
    component: str
    kind: TraceKind
    detail: tuple[tuple[str, str], ...] = ()

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        for k, v in self.detail:
            if k == key:
                return v
        return default

    def line(self) -> str:
        detail = " ".join(f"{k}={v}" for k, v in self.detail)
        return f"{self.time}\t{self.component}\t{self.kind.value}\t{detail}"


class Trace:
    """Append-only trace with a running xxh64 digest over the line encoding.

    With ``keep=False`` only the digest and the record count are retained,
    which is what long sweeps want.
    """

    def __init__(self, keep: bool = True):
        self.keep = keep
        self.records: list[TraceRecord] = []
        self.count = 0
        self._digest = xxhash.xxh64(seed=0)
        self._last_time = 0

    def append(self, record: TraceRecord) -> None:
        if record.time < self._last_time:
            raise SimulationError(f"trace time went backwards at {record}")
        self._last_time = record.time
        self._digest.update(record.line().encode())
        self._digest.update(b"\n")
        self.count += 1
        if self.keep:
            self.records.append(record)

    def __len__(self) -> int:
        return self.count

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    @property
    def digest(self) -> int:
        return self._digest.intdigest()

    def lines(self) -> Iterable[str]:
        return (r.line() for r in self.records)

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line)
                fh.write("\n")


class Simulator:
    """Single-threaded event scheduler.

    Events fire in ``(fire_at, seq)`` order; ``seq`` is the insertion counter,
    so equal-time events run in the order they were scheduled.
    """

    def __init__(self, keep_trace: bool = True):
        self.now: SimTime = 0
        self._queue: list[ScheduledEvent] = []
        self._seq = itertools.count()
        self.trace = Trace(keep=keep_trace)
        self.fired = 0

    def schedule(self, fire_at: SimTime, action: Callable[[], Any],
                 target: str = "", payload: Any = None) -> ScheduledEvent:
        if fire_at < self.now:
            raise SimulationError(
                f"event for {target!r} scheduled at {fire_at} < now={self.now}")
        ev = ScheduledEvent(fire_at, next(self._seq), target, payload, action)
        heapq.heappush(self._queue, ev)
        return ev

    def after(self, delay: SimTime, action: Callable[[], Any],
              target: str = "", payload: Any = None) -> ScheduledEvent:
        return self.schedule(self.now + delay, action, target, payload)

    def schedule_event(self, ev: ScheduledEvent) -> ScheduledEvent:
        """Queue a caller-built event; its ``seq`` is reassigned."""
        if ev.fire_at < self.now:
            raise SimulationError(f"event {ev} scheduled in the past (now={self.now})")
        ev.seq = next(self._seq)
        heapq.heappush(self._queue, ev)
        return ev

    def pending(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def peek(self) -> Optional[SimTime]:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].fire_at if self._queue else None

    def run_until(self, t_end: SimTime) -> int:
        """Fire every event with ``fire_at <= t_end``; return how many fired.

        Afterwards ``now`` is ``t_end`` if later events remain queued,
        otherwise the time of the last event fired.
        """
        fired = 0
        queue = self._queue
        while queue:
            ev = queue[0]
            if ev.cancelled:
                heapq.heappop(queue)
                continue
            if ev.fire_at > t_end:
                break
            heapq.heappop(queue)
            self.now = ev.fire_at
            fired += 1
            if ev.action is not None:
                ev.action()
        if self.peek() is not None and t_end > self.now:
            self.now = t_end
        self.fired += fired
        return fired

    def record(self, component: str, kind: TraceKind, **detail: Any) -> None:
        self.trace.append(TraceRecord(
            self.now, component, kind,
            tuple((k, _fmt(v)) for k, v in detail.items())))


def _fmt(v: Any) -> str:
    if isinstance(v, enum.Enum):
        return str(v.name)
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


@dataclass(frozen=True)
class ClockDomain:
    id: str
    period: int = DEFAULT_PERIOD_PS
    phase: int = 0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f"clock {self.id}: period must be positive")
        if not 0 <= self.phase < self.period:
            raise ValueError(f"clock {self.id}: phase must satisfy 0 <= phase < period")

    def next_edge(self, after: SimTime) -> SimTime:
        return next_edge(self, after)

    def edge_at_or_after(self, t: SimTime) -> SimTime:
        return next_edge(self, t - 1)


def next_edge(d: ClockDomain, after: SimTime) -> SimTime:
    """Smallest ``phase + k*period`` (k >= 0) strictly greater than ``after``."""
    if after < d.phase:
        return d.phase
    k = (after - d.phase) // d.period + 1
    return d.phase + k * d.period


def cdc_synchronize(level: int, dest: ClockDomain, changed_at: SimTime) -> SimTime:
    """Time at which a two-flop synchronizer in ``dest`` presents a change.

    The first flop captures on the first edge strictly after the change, the
    second on the edge after that. ``level`` does not affect the latency.
    """
    del level
    return dest.next_edge(dest.next_edge(changed_at))


class Synchronizer:
    """Stateful two-flop synchronizer for one binary level.

    Changes arriving faster than one destination period are queued and
    presented on consecutive edges rather than swallowed.
    """

    def __init__(self, sim: Simulator, name: str, dest: ClockDomain, level: int = 0,
                 wake: Optional[Callable[[SimTime], None]] = None):
        self.sim = sim
        self.name = name
        self.dest = dest
        self.raw = level
        self.value = level
        self.wake = wake
        self._pending: deque[tuple[SimTime, int]] = deque()
        self._last_observe = -1

    def change(self, level: int) -> SimTime:
        t = self.sim.now
        if level == self.raw:
            raise SimulationError(f"{self.name}: redundant level change to {level}")
        self.raw = level
        observe = cdc_synchronize(level, self.dest, t)
        if observe <= self._last_observe:
            observe = self.dest.next_edge(self._last_observe)
        self._last_observe = observe
        self._pending.append((observe, level))
        self.sim.record(self.name, TraceKind.HANDSHAKE, sync="in", level=level,
                        observe_at=observe, dest=self.dest.id)
        if self.wake is not None:
            self.wake(observe)
        return observe

    def sample(self, edge_time: SimTime) -> int:
        """Advance to ``edge_time`` and return the synchronized level."""
        while self._pending and self._pending[0][0] <= edge_time:
            at, level = self._pending.popleft()
            if at != edge_time:
                raise SimulationError(f"{self.name}: missed edge {at} (sampled {edge_time})")
            self.value = level
            self.sim.record(self.name, TraceKind.HANDSHAKE, sync="out", level=level,
                            dest=self.dest.id)
        return self.value

    @property
    def busy(self) -> bool:
        return bool(self._pending)


class Clock:
    """Drives ``handler(edge_time) -> keep_running`` on the rising edges of a domain.

    The clock sleeps while the handler reports nothing to do; ``wake_at`` asks
    for the first edge at or after a given time.
    """

    def __init__(self, sim: Simulator, domain: ClockDomain,
                 handler: Callable[[SimTime], bool], always_on: bool = False):
        self.sim = sim
        self.domain = domain
        self.handler = handler
        self.always_on = always_on
        self.last_edge: Optional[SimTime] = None
        self._event: Optional[ScheduledEvent] = None
        self._requests: list[SimTime] = []
        self.edges = 0

    def start(self) -> None:
        self.wake_at(self.sim.now)

    def wake(self) -> None:
        """Request the next edge strictly after now."""
        self.wake_at(self.sim.now + 1)

    def wake_at(self, t: SimTime) -> None:
        edge = self.domain.edge_at_or_after(max(t, self.sim.now))
        if self.last_edge is not None and edge <= self.last_edge:
            edge = self.domain.next_edge(self.last_edge)
        if self._event is not None and not self._event.cancelled:
            if self._event.fire_at <= edge:
                heapq.heappush(self._requests, edge)
                return
            self._event.cancel()
            heapq.heappush(self._requests, self._event.fire_at)
        self._event = self.sim.schedule(edge, self._edge, target=self.domain.id)

    def _edge(self) -> None:
        t = self.sim.now
        self._event = None
        self.last_edge = t
        self.edges += 1
        while self._requests and self._requests[0] <= t:
            heapq.heappop(self._requests)
        keep = self.handler(t) or self.always_on
        if keep:
            self.wake_at(self.domain.next_edge(t))
        elif self._requests:
            self.wake_at(heapq.heappop(self._requests))
