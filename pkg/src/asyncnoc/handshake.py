"""Four-phase bundled-data channel: req up, ack up, req down, ack down.

Every phase costs ``delay`` ps of wire time. The responder decides when to
raise ack, which is how a full buffer stalls its upstream neighbour.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .kernel import SimulationError, Simulator, TraceKind, TraceRecord
from .packet import Flit

__all__ = ["Role", "AsyncPort", "Channel", "handshake_violations"]


class Role(enum.Enum):
    INITIATOR = "initiator"
    RESPONDER = "responder"


@dataclass
class AsyncPort:
    req: int = 0
    ack: int = 0
    data: Optional[Flit] = None

    @property
    def idle(self) -> bool:
        return self.req == 0 and self.ack == 0


class Channel:
    """One point-to-point asynchronous link carrying one flit per handshake."""

    def __init__(self, sim: Simulator, name: str, delay: int = 1000,
                 on_accept: Optional[Callable[[Flit], None]] = None):
        if delay <= 0:
            raise ValueError("channel delay must be positive")
        self.sim = sim
        self.name = name
        self.delay = delay
        self.port = AsyncPort()
        self.receiver: Optional[Callable[[Flit], None]] = None
        self.on_accept = on_accept
        self.disconnected = False
        self.transfers = 0
        self._offered = False
        self._on_complete: Optional[Callable[[], None]] = None

    @property
    def busy(self) -> bool:
        return self._on_complete is not None

    def _edge(self, sig: str, level: int) -> None:
        self.sim.record(self.name, TraceKind.HANDSHAKE, sig=sig, level=level)

    # initiator side
    def send(self, flit: Flit, on_complete: Callable[[], None]) -> None:
        if self.busy or not self.port.idle:
            raise SimulationError(f"{self.name}: send while channel not idle "
                                  f"(req={self.port.req} ack={self.port.ack})")
        self._on_complete = on_complete
        self.port.data = flit
        self.port.req = 1
        self._edge("req", 1)
        self.sim.after(self.delay, self._req_rise_seen, self.name)

    def _req_rise_seen(self) -> None:
        if self.disconnected:
            return
        if self.receiver is None:
            raise SimulationError(f"{self.name}: no responder attached")
        self._offered = True
        self.receiver(self.port.data)

    # responder side
    def accept(self) -> None:
        if not self._offered or self.port.req != 1 or self.port.ack != 0:
            raise SimulationError(f"{self.name}: accept out of protocol order")
        self._offered = False
        self.port.ack = 1
        self._edge("ack", 1)
        flit = self.port.data
        self.sim.record(self.name, TraceKind.FLIT, flit=flit.kind.value,
                        data=f"{flit.payload:08x}")
        self.transfers += 1
        if self.on_accept is not None:
            self.on_accept(flit)
        self.sim.after(self.delay, self._ack_rise_seen, self.name)

    def _ack_rise_seen(self) -> None:
        self.port.req = 0
        self._edge("req", 0)
        self.sim.after(self.delay, self._req_fall_seen, self.name)

    def _req_fall_seen(self) -> None:
        self.port.ack = 0
        self._edge("ack", 0)
        self.sim.after(self.delay, self._ack_fall_seen, self.name)

    def _ack_fall_seen(self) -> None:
        self.port.data = None
        done, self._on_complete = self._on_complete, None
        done()


_ORDER = (("req", "1"), ("ack", "1"), ("req", "0"), ("ack", "0"))


def handshake_violations(records: Iterable[TraceRecord]) -> list[str]:
    """Check every traced channel follows req+, ack+, req-, ack- with rising times."""
    phase: dict[str, int] = defaultdict(int)
    last: dict[str, int] = {}
    problems = []
    for r in records:
        if r.kind is not TraceKind.HANDSHAKE or r.get("sig") is None:
            continue
        step = (r.get("sig"), r.get("level"))
        ch = r.component
        if step != _ORDER[phase[ch]]:
            problems.append(f"{r.time} {ch}: got {step}, expected {_ORDER[phase[ch]]}")
            continue
        if ch in last and r.time <= last[ch]:
            problems.append(f"{r.time} {ch}: {step} not after previous edge at {last[ch]}")
        last[ch] = r.time
        phase[ch] = (phase[ch] + 1) % 4
    return problems
