"""Five-port asynchronous router.

Input ports are combinational header decoders, a mutex per output serializes
competing packets, and each output owns a FIFO draining onto its outgoing
channel. A packet is admitted to an output FIFO only when the whole packet
fits; otherwise it is dropped (``DROP_ON_FULL``) or its input channel stalls
(``BACKPRESSURE``).
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .handshake import Channel
from .kernel import SimulationError, Simulator, TraceKind
from .packet import FLITS_PER_PACKET, Flit, FlitKind
from .topology import MAX_HOPS, Direction, SourceRoute, decode_next_hop

__all__ = [
    "DropPolicy", "RouterConfig", "FifoBuffer", "MutexState", "Grant", "arbitrate",
    "InputPortState", "Router", "PORT_PRIORITY",
]

# simultaneity tie-break for the mutex
PORT_PRIORITY = (Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST,
                 Direction.LOCAL)


class DropPolicy(enum.Enum):
    DROP_ON_FULL = "drop_on_full"
    BACKPRESSURE = "backpressure"


@dataclass(frozen=True)
class RouterConfig:
    fifo_depth: int = 8
    channel_delay: int = 1000
    drop_policy: DropPolicy = DropPolicy.DROP_ON_FULL

    def __post_init__(self):
        if self.fifo_depth < FLITS_PER_PACKET:
            raise ValueError(
                f"fifo_depth must hold a whole packet ({FLITS_PER_PACKET} flits)")
        if self.channel_delay <= 0:
            raise ValueError("channel_delay must be positive")


class FifoBuffer:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.contents: deque[Flit] = deque()
        # slots promised to the packet currently streaming in
        self.reserved = 0

    def __len__(self) -> int:
        return len(self.contents)

    @property
    def free(self) -> int:
        return self.capacity - len(self.contents) - self.reserved

    def reserve(self, n: int) -> None:
        if n > self.free:
            raise SimulationError("FIFO reservation beyond capacity")
        self.reserved += n

    def push(self, flit: Flit) -> None:
        if self.reserved:
            self.reserved -= 1
        elif self.free <= 0:
            raise SimulationError("FIFO overflow")
        self.contents.append(flit)

    def pop(self) -> Flit:
        return self.contents.popleft()


class Grant(enum.Enum):
    GRANTED = "granted"
    QUEUED = "queued"


@dataclass
class _OutputMutex:
    holder: Optional[Direction] = None
    waiters: list[tuple[int, int, Direction]] = field(default_factory=list)


class MutexState:
    """Per-output mutual exclusion, FCFS with fixed-priority tie-break.

    ``request`` only enqueues; ``resolve`` grants the earliest waiter once
    the output is free. Requests sharing a timestamp are ordered by
    ``PORT_PRIORITY`` no matter which arrived first within that instant.
    """

    def __init__(self):
        self.outputs: dict[Direction, _OutputMutex] = {d: _OutputMutex() for d in Direction}

    def request(self, output: Direction, requester: Direction, time: int) -> None:
        m = self.outputs[output]
        if m.holder == requester or any(w[2] == requester for w in m.waiters):
            raise SimulationError(f"{requester.name} requested {output.name} twice")
        m.waiters.append((time, PORT_PRIORITY.index(requester), requester))
        m.waiters.sort()

    def resolve(self, output: Direction) -> Optional[Direction]:
        m = self.outputs[output]
        if m.holder is not None or not m.waiters:
            return None
        m.holder = m.waiters.pop(0)[2]
        return m.holder

    def release(self, output: Direction, requester: Direction) -> None:
        m = self.outputs[output]
        if m.holder != requester:
            raise SimulationError(f"{requester.name} released {output.name} it does not hold")
        m.holder = None

    def holder(self, output: Direction) -> Optional[Direction]:
        return self.outputs[output].holder


def arbitrate(mutex: MutexState, output: Direction, requester: Direction,
              time: int) -> Grant:
    """Request ``output`` and settle immediately (no simultaneity window)."""
    mutex.request(output, requester, time)
    mutex.resolve(output)
    return Grant.GRANTED if mutex.holder(output) == requester else Grant.QUEUED


class _In(enum.Enum):
    IDLE = "idle"
    WAIT_GRANT = "wait_grant"
    WAIT_SPACE = "wait_space"
    FORWARD = "forward"
    DISCARD = "discard"


@dataclass
class InputPortState:
    port: Direction
    current_route_decision: Optional[Direction] = None
    flits_remaining: int = 0
    mode: _In = _In.IDLE
    pending: Optional[Flit] = None
    channel: Optional[Channel] = None


@dataclass
class RouterCounters:
    forwarded_packets: int = 0
    drops: int = 0
    malformed: int = 0


class Router:
    def __init__(self, sim: Simulator, name: str, config: RouterConfig,
                 on_drop: Optional[Callable[[str], None]] = None):
        self.sim = sim
        self.name = name
        self.config = config
        self.on_drop = on_drop
        self.mutex = MutexState()
        self.counters = RouterCounters()
        self.inputs = {d: InputPortState(d) for d in Direction}
        self.fifos = {d: FifoBuffer(config.fifo_depth) for d in Direction}
        self.out_channels: dict[Direction, Channel] = {}
        self._sending: set[Direction] = set()
        self._resolve_pending: set[Direction] = set()

    # wiring
    def attach_input(self, port: Direction, channel: Channel) -> None:
        self.inputs[port].channel = channel
        channel.receiver = lambda flit, port=port: self.input_accept(port, flit)

    def attach_output(self, port: Direction, channel: Channel) -> None:
        self.out_channels[port] = channel

    # input side
    def input_accept(self, port: Direction, flit: Flit) -> None:
        st = self.inputs[port]
        st.pending = flit
        if flit.kind is not FlitKind.HEAD:
            st.flits_remaining -= 1
        if flit.kind is FlitKind.HEAD:
            if st.mode is not _In.IDLE:
                raise SimulationError(f"{self.name}.{port.name}: head while {st.mode.value}")
            self._decode_head(st, flit)
            return
        if st.mode is _In.DISCARD:
            self._take(st)
            if flit.kind is FlitKind.TAIL:
                st.mode = _In.IDLE
            return
        if st.mode is not _In.FORWARD:
            raise SimulationError(
                f"{self.name}.{port.name}: {flit.kind.name} flit with no held grant")
        self.forward(st.current_route_decision, flit)
        self._take(st)
        if flit.kind is FlitKind.TAIL:
            self.mutex.release(st.current_route_decision, port)
            self._schedule_resolve(st.current_route_decision)
            st.mode = _In.IDLE
            st.current_route_decision = None

    def _decode_head(self, st: InputPortState, flit: Flit) -> None:
        # Hop count travels in the tail, so the header decoder sees the whole
        # 32-bit field; an exhausted route reads as repeated NORTH codes and
        # ends at the mesh edge below.
        out, remaining = decode_next_hop(SourceRoute(flit.payload, MAX_HOPS), st.port)
        st.pending = Flit(FlitKind.HEAD, remaining.packed)
        if out not in self.out_channels:
            self.counters.malformed += 1
            self.sim.record(self.name, TraceKind.DROP, port=st.port, reason="malformed",
                            out=out)
            if self.on_drop:
                self.on_drop("malformed")
            st.mode = _In.DISCARD
            st.flits_remaining = FLITS_PER_PACKET - 1
            self._take(st)
            return
        st.current_route_decision = out
        st.mode = _In.WAIT_GRANT
        self.sim.record(self.name, TraceKind.STATE, port=st.port, request=out)
        self.mutex.request(out, st.port, self.sim.now)
        self._schedule_resolve(out)

    def _take(self, st: InputPortState) -> None:
        st.pending = None
        st.channel.accept()

    def _schedule_resolve(self, output: Direction) -> None:
        if output in self._resolve_pending:
            return
        self._resolve_pending.add(output)
        self.sim.after(0, lambda: self._resolve(output), self.name)

    def _resolve(self, output: Direction) -> None:
        self._resolve_pending.discard(output)
        winner = self.mutex.resolve(output)
        if winner is None:
            return
        self.sim.record(self.name, TraceKind.STATE, grant=output, holder=winner)
        st = self.inputs[winner]
        st.mode = _In.WAIT_SPACE
        self._try_admit(st)

    def _try_admit(self, st: InputPortState) -> None:
        out = st.current_route_decision
        result = self.forward(out, st.pending)
        if result == "stalled":
            return
        if result == "dropped":
            self.mutex.release(out, st.port)
            self._schedule_resolve(out)
            st.mode = _In.DISCARD
        else:
            st.mode = _In.FORWARD
        st.flits_remaining = FLITS_PER_PACKET - 1
        self._take(st)

    # output side
    def forward(self, output: Direction, flit: Flit) -> str:
        """Admit one flit to ``output``'s FIFO: 'enqueued', 'dropped' or 'stalled'."""
        fifo = self.fifos[output]
        if flit.kind is FlitKind.HEAD:
            if fifo.free < FLITS_PER_PACKET:
                if self.config.drop_policy is DropPolicy.BACKPRESSURE:
                    return "stalled"
                self.counters.drops += 1
                self.sim.record(self.name, TraceKind.DROP, out=output, reason="full",
                                free=fifo.free)
                if self.on_drop:
                    self.on_drop("full")
                return "dropped"
            fifo.reserve(FLITS_PER_PACKET)
            self.counters.forwarded_packets += 1
        fifo.push(flit)
        self._kick(output)
        return "enqueued"

    def _kick(self, output: Direction) -> None:
        if output in self._sending:
            return
        fifo = self.fifos[output]
        if not fifo.contents:
            return
        self._sending.add(output)
        self.out_channels[output].send(fifo.contents[0], lambda: self._sent(output))

    def _sent(self, output: Direction) -> None:
        self._sending.discard(output)
        self.fifos[output].pop()
        self._kick(output)
        holder = self.mutex.holder(output)
        if holder is not None and self.inputs[holder].mode is _In.WAIT_SPACE:
            self._try_admit(self.inputs[holder])

    def output_dequeue(self, output: Direction) -> bool:
        """Start draining ``output`` if idle; False when there is nothing to send."""
        if not self.fifos[output].contents:
            return False
        self._kick(output)
        return True
