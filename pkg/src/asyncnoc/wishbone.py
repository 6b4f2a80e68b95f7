"""WISHBONE classic single-cycle bus models.

``MasterCore`` and ``SlaveMemory`` are clocked bus-functional models; each
exposes ``step(bus, t)`` which samples the signals registered on the
previous edge and returns the fields it drives next. ``WishboneChecker``
watches one bus. ``flow_control_step`` is the end-to-end retransmission
engine run by a master processing element.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .kernel import ScheduledEvent, Simulator, SimTime, TraceKind
from .packet import Packet

__all__ = [
    "WbSignals", "IDLE_BUS", "OpKind", "WbOp", "MasterWorkload", "random_ops",
    "MasterCore", "SlaveMemory", "Violation", "WishboneChecker",
    "STB_WITHOUT_CYC", "UNSTABLE_ADDRESS", "ACK_WITHOUT_STB",
    "FcAction", "Outstanding", "FlowControlState", "Sent", "Response", "Timer",
    "flow_control_step", "FlowControl", "masked_write",
]

WORD = 0xFFFF_FFFF


@dataclass(frozen=True)
class WbSignals:
    cyc: int = 0
    stb: int = 0
    we: int = 0
    adr: int = 0
    dat_w: int = 0
    dat_r: int = 0
    sel: int = 0
    ack: int = 0

    @property
    def active(self) -> bool:
        return bool(self.cyc and self.stb)

    def short(self) -> str:
        return (f"cyc={self.cyc} stb={self.stb} we={self.we} adr={self.adr:08x} "
                f"dw={self.dat_w:08x} dr={self.dat_r:08x} sel={self.sel:x} ack={self.ack}")


IDLE_BUS = WbSignals()

MASTER_FIELDS = ("cyc", "stb", "we", "adr", "dat_w", "sel")
SLAVE_FIELDS = ("dat_r", "ack")


def masked_write(old: int, new: int, sel: int) -> int:
    out = old
    for lane in range(4):
        if sel >> lane & 1:
            mask = 0xFF << (8 * lane)
            out = (out & ~mask) | (new & mask)
    return out & WORD


# --------------------------------------------------------------------------
# workloads

class OpKind(enum.Enum):
    READ = "read"
    WRITE = "write"


@dataclass(frozen=True)
class WbOp:
    kind: OpKind
    adr: int
    data: int = 0
    sel: int = 0xF
    # idle cycles before the strobe goes up
    delay: int = 0


@dataclass
class MasterWorkload:
    """Scripted op list, or ``count`` random write-then-read pairs.

    A random workload without its own ``seed`` derives one from the run seed,
    so changing the run seed changes the traffic.
    """

    ops: list[WbOp] = field(default_factory=list)
    mode: str = "scripted"
    count: int = 0
    seed: Optional[int] = None
    slaves: tuple[int, ...] = ()
    words: int = 16

    def resolve(self, master: int, run_seed: int) -> list[WbOp]:
        if self.mode == "scripted":
            return list(self.ops)
        seed = self.seed
        if seed is None:
            seed = random.Random(f"{run_seed}:{master}").getrandbits(32)
        return random_ops(self.count, seed, self.slaves, region=master, words=self.words)


def random_ops(count: int, seed: int, slave_prefixes: Sequence[int],
               region: int = 0, words: int = 16) -> list[WbOp]:
    """``count`` write-then-read pairs at random slaves.

    Addresses fall in a per-master ``region`` so that concurrent masters never
    alias each other's words.
    """
    rng = random.Random(seed)
    prefixes = list(slave_prefixes)
    ops = []
    for _ in range(count):
        prefix = rng.choice(prefixes)
        adr = (prefix << 28) | (region << 12) | (rng.randrange(words) << 2)
        data = rng.getrandbits(32)
        ops.append(WbOp(OpKind.WRITE, adr, data, 0xF, rng.randrange(3)))
        ops.append(WbOp(OpKind.READ, adr, 0, 0xF, rng.randrange(3)))
    return ops


# --------------------------------------------------------------------------
# checker

STB_WITHOUT_CYC = "stb-without-cyc"
UNSTABLE_ADDRESS = "unstable-address"
ACK_WITHOUT_STB = "ack-without-stb"


@dataclass(frozen=True)
class Violation:
    rule: str
    time: SimTime
    bus: str
    detail: str = ""


class WishboneChecker:
    """Flags stb-without-cyc, request signals moving before ack, and stray acks."""

    def __init__(self, name: str, sim: Optional[Simulator] = None):
        self.name = name
        self.sim = sim
        self.violations: list[Violation] = []
        self._latched: Optional[tuple] = None

    def observe(self, s: WbSignals, edge_time: SimTime) -> list[Violation]:
        found = []
        if s.stb and not s.cyc:
            found.append(Violation(STB_WITHOUT_CYC, edge_time, self.name))
        if s.ack and not s.stb:
            found.append(Violation(ACK_WITHOUT_STB, edge_time, self.name))
        if s.stb:
            now = (s.adr, s.dat_w, s.sel, s.we)
            if self._latched is None:
                self._latched = now
            elif now != self._latched:
                moved = [n for n, a, b in zip(("adr", "dat_w", "sel", "we"),
                                              self._latched, now) if a != b]
                found.append(Violation(UNSTABLE_ADDRESS, edge_time, self.name,
                                       ",".join(moved)))
                self._latched = now
            if s.ack:
                self._latched = None
        else:
            self._latched = None
        for v in found:
            if self.sim is not None:
                self.sim.record(self.name, TraceKind.WB, violation=v.rule, detail=v.detail)
        self.violations.extend(found)
        return found


# --------------------------------------------------------------------------
# flow control

class FcAction(enum.Enum):
    NONE = "none"
    COMPLETE = "complete"
    RETRANSMIT = "retransmit"
    FAIL = "fail"


@dataclass(frozen=True)
class Outstanding:
    tag: int
    packet: Optional[Packet]
    sent_at: SimTime


@dataclass
class FlowControlState:
    timeout: int = 1_000_000
    max_retries: int = 8
    outstanding: Optional[Outstanding] = None
    retries: int = 0
    retransmits: int = 0
    failures: int = 0
    completions: int = 0
    stale: int = 0
    spurious: int = 0


@dataclass(frozen=True)
class Sent:
    tag: int
    packet: Optional[Packet] = None


@dataclass(frozen=True)
class Response:
    tag: int


@dataclass(frozen=True)
class Timer:
    pass


def flow_control_step(state: FlowControlState, event, now: SimTime = 0) -> FcAction:
    if isinstance(event, Sent):
        out = state.outstanding
        if out is None or out.tag != event.tag:
            state.retries = 0
        state.outstanding = Outstanding(event.tag, event.packet, now)
        return FcAction.NONE
    if isinstance(event, Response):
        out = state.outstanding
        if out is None:
            state.spurious += 1
            return FcAction.NONE
        if out.tag != event.tag:
            state.stale += 1
            return FcAction.NONE
        state.outstanding = None
        state.completions += 1
        return FcAction.COMPLETE
    if isinstance(event, Timer):
        if state.outstanding is None:
            return FcAction.NONE
        if state.retries < state.max_retries:
            state.retries += 1
            state.retransmits += 1
            return FcAction.RETRANSMIT
        state.outstanding = None
        state.failures += 1
        return FcAction.FAIL
    raise TypeError(f"unknown flow-control event {event!r}")


class FlowControl:
    """Timer plumbing around ``flow_control_step`` for one master PE."""

    def __init__(self, sim: Simulator, name: str, state: FlowControlState,
                 on_retransmit: Callable[[Packet], None],
                 on_fail: Callable[[], None]):
        self.sim = sim
        self.name = name
        self.state = state
        self.on_retransmit = on_retransmit
        self.on_fail = on_fail
        self._timer: Optional[ScheduledEvent] = None

    def _arm(self) -> None:
        self._disarm()
        self._timer = self.sim.after(self.state.timeout, self._fire, self.name)

    def _disarm(self) -> None:
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def sent(self, tag: int, packet: Packet) -> None:
        flow_control_step(self.state, Sent(tag, packet), self.sim.now)
        self._arm()

    def response(self, tag: int) -> FcAction:
        action = flow_control_step(self.state, Response(tag), self.sim.now)
        if action is FcAction.COMPLETE:
            self._disarm()
        return action

    def local_failure(self) -> None:
        """Abandon a transaction that never reached the network."""
        self._disarm()
        self.state.outstanding = None
        self.state.failures += 1
        self.on_fail()

    def _fire(self) -> None:
        self._timer = None
        out = self.state.outstanding
        action = flow_control_step(self.state, Timer(), self.sim.now)
        if action is FcAction.RETRANSMIT:
            self.sim.record(self.name, TraceKind.RETRANSMIT, tag=out.tag,
                            attempt=self.state.retries)
            self._arm()
            self.on_retransmit(out.packet)
        elif action is FcAction.FAIL:
            self.sim.record(self.name, TraceKind.RETRANSMIT, tag=out.tag, outcome="fail")
            self.on_fail()


# --------------------------------------------------------------------------
# bus-functional models

class _M(enum.Enum):
    IDLE = "idle"
    CYCLE = "cycle"
    DONE = "done"


@dataclass
class CompletedOp:
    op: WbOp
    issued_at: SimTime
    completed_at: SimTime
    dat_r: int
    failed: bool


class MasterCore:
    """Issues ``ops`` one classic cycle at a time.

    Strobe rises with all request signals together, stays up until ack is
    sampled, then drops for at least one cycle before the next op.
    """

    def __init__(self, name: str, ops: Sequence[WbOp] = (),
                 on_issue: Optional[Callable[[WbOp, SimTime], None]] = None,
                 on_done: Optional[Callable[[CompletedOp], None]] = None):
        self.name = name
        self.ops = list(ops)
        self.next_op = 0
        self.state = _M.IDLE if self.ops else _M.DONE
        self.current: Optional[WbOp] = None
        self.issued_at = 0
        self.wait = self.ops[0].delay if self.ops else 0
        self.abort_pending = False
        self.results: list[CompletedOp] = []
        self.on_issue = on_issue
        self.on_done = on_done
        self.drive = {f: 0 for f in MASTER_FIELDS}

    @property
    def wants_edge(self) -> bool:
        return self.state is _M.IDLE or self.abort_pending

    @property
    def finished(self) -> bool:
        return self.state is _M.DONE

    def abort(self) -> None:
        if self.state is _M.CYCLE:
            self.abort_pending = True

    def step(self, bus: WbSignals, t: SimTime) -> dict:
        if self.state is _M.CYCLE:
            if bus.ack and bus.stb:
                self._finish(t, bus.dat_r, failed=False)
            elif self.abort_pending:
                self._finish(t, 0, failed=True)
        elif self.state is _M.IDLE:
            if self.wait > 0:
                self.wait -= 1
            else:
                op = self.current = self.ops[self.next_op]
                self.next_op += 1
                self.issued_at = t
                self.drive = dict(cyc=1, stb=1, we=int(op.kind is OpKind.WRITE), adr=op.adr,
                                  dat_w=op.data if op.kind is OpKind.WRITE else 0, sel=op.sel)
                self.state = _M.CYCLE
                if self.on_issue:
                    self.on_issue(op, t)
        return self.drive

    def _finish(self, t: SimTime, dat_r: int, failed: bool) -> None:
        self.abort_pending = False
        done = CompletedOp(self.current, self.issued_at, t, dat_r, failed)
        self.results.append(done)
        self.drive = {f: 0 for f in MASTER_FIELDS}
        self.current = None
        if self.next_op < len(self.ops):
            self.state = _M.IDLE
            self.wait = self.ops[self.next_op].delay
        else:
            self.state = _M.DONE
        if self.on_done:
            self.on_done(done)


@dataclass
class SlaveMemory:
    """Word-addressed memory core answering classic cycles after ``wait_states``."""

    base: int = 0
    words: dict[int, int] = field(default_factory=dict)
    wait_states: int = 0
    _count: int = 0
    _acking: bool = False
    writes: int = 0
    reads: int = 0

    def __post_init__(self):
        if self.base & 0x0FFF_FFFF:
            raise ValueError(f"slave base {self.base:#x} is not aligned to the 4-bit prefix")

    def read(self, adr: int) -> int:
        return self.words.get(adr & ~3 & WORD, 0)

    def write(self, adr: int, data: int, sel: int) -> None:
        key = adr & ~3 & WORD
        self.words[key] = masked_write(self.words.get(key, 0), data, sel)

    @property
    def busy(self) -> bool:
        return self._acking or self._count > 0

    def step(self, bus: WbSignals, t: SimTime) -> dict:
        if self._acking:
            self._acking = False
            self._count = 0
            return {"ack": 0, "dat_r": 0}
        if not bus.active:
            self._count = 0
            return {"ack": 0, "dat_r": 0}
        if self._count < self.wait_states:
            self._count += 1
            return {"ack": 0, "dat_r": 0}
        self._acking = True
        if bus.we:
            self.write(bus.adr, bus.dat_w, bus.sel)
            self.writes += 1
            return {"ack": 1, "dat_r": 0}
        self.reads += 1
        return {"ack": 1, "dat_r": self.read(bus.adr)}


def slave_respond(core: SlaveMemory, observed: WbSignals, t: SimTime = 0) -> WbSignals:
    """One clock edge of ``core`` given the bus it sampled."""
    return replace(observed, **core.step(observed, t))
