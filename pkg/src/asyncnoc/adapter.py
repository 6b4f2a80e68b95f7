"""Master and slave network adapters.

Each adapter is split into a clocked core interface (the transmit and
receive FSMs, stepped on the node's clock edges) and an asynchronous network
interface (a transmitter streaming flits into the router's local port and a
receiver assembling packets from it). The two halves talk through a
packet-level four-phase envelope; the levels coming back from the
asynchronous side pass through a two-flop ``Synchronizer`` before any FSM
looks at them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

from .handshake import Channel
from .kernel import SimulationError, Simulator, SimTime, Synchronizer, TraceKind
from .packet import (FLITS_PER_PACKET, Flit, MalformedPacket, Packet, Status,
                     TransactionPayload, TxnKind, deserialize, serialize)
from .topology import (MeshDims, SourceRoute, compute_route, coord_of,
                       encode_route)
from .wishbone import FcAction, WbSignals

__all__ = [
    "NaFsmState", "LutEntry", "RouteLut", "UnmappedPrefix", "build_lut", "lut_lookup",
    "route_between", "AsyncTransmitter", "AsyncReceiver", "AdapterCounters",
    "MasterAdapter", "SlaveAdapter",
]


class NaFsmState(enum.Enum):
    WAIT = "Wait"
    STORE_PACKET = "StorePacket"
    ROUTE_LOOKUP = "RouteLookup"
    REQ = "Req"
    ACK = "Ack"


class UnmappedPrefix(LookupError):
    pass


@lru_cache(maxsize=None)
def route_between(src: int, dst: int, dims: MeshDims) -> SourceRoute:
    return encode_route(compute_route(coord_of(src, dims), coord_of(dst, dims)))


@dataclass(frozen=True)
class LutEntry:
    node: int
    route: Optional[SourceRoute]

    @property
    def loopback(self) -> bool:
        return self.route is None


@dataclass(frozen=True)
class RouteLut:
    entries: tuple[Optional[LutEntry], ...] = (None,) * 16

    def __post_init__(self):
        if len(self.entries) != 16:
            raise ValueError("route LUT has exactly 16 entries")


def build_lut(master: int, prefix_to_node: dict[int, int], dims: MeshDims) -> RouteLut:
    entries: list[Optional[LutEntry]] = [None] * 16
    for prefix, node in prefix_to_node.items():
        if not 0 <= prefix < 16:
            raise ValueError(f"address prefix {prefix} is not 4 bits")
        route = None if node == master else route_between(master, node, dims)
        entries[prefix] = LutEntry(node, route)
    return RouteLut(tuple(entries))


def lut_lookup(lut: RouteLut, adr: int) -> LutEntry:
    prefix = (adr >> 28) & 0xF
    entry = lut.entries[prefix]
    if entry is None:
        raise UnmappedPrefix(f"address {adr:#010x}: prefix {prefix:#x} is unmapped")
    return entry


@dataclass
class AdapterCounters:
    sent: int = 0
    received: int = 0
    discarded_malformed: int = 0
    stale_tag: int = 0
    unmapped_prefix: int = 0
    loopback: int = 0


# --------------------------------------------------------------------------
# asynchronous network interface

class AsyncTransmitter:
    """Streams the core interface's packet buffer into the router, one flit
    per channel handshake, then acknowledges the envelope."""

    def __init__(self, sim: Simulator, name: str, link: Channel, ack_sync: Synchronizer,
                 source: Callable[[], list[Flit]]):
        self.sim = sim
        self.name = name
        self.link = link
        self.ack_sync = ack_sync
        self.source = source
        self.ack = 0
        self.packets = 0

    def req_seen(self, level: int) -> None:
        if level:
            self._stream(list(self.source()))
        else:
            self._set_ack(0)

    def _set_ack(self, level: int) -> None:
        self.ack = level
        self.sim.record(self.name, TraceKind.HANDSHAKE, sig="ack", level=level)
        self.ack_sync.change(level)

    def _stream(self, flits: list[Flit]) -> None:
        if not flits:
            self.packets += 1
            self._set_ack(1)
            return
        head, rest = flits[0], flits[1:]
        self.link.send(head, lambda: self._stream(rest))


class AsyncReceiver:
    """Collects one packet from the router's local output and offers it to the
    core interface; the link stalls while the buffer is full."""

    def __init__(self, sim: Simulator, name: str, link: Channel, req_sync: Synchronizer,
                 on_packet: Optional[Callable[[], None]] = None):
        self.sim = sim
        self.name = name
        self.link = link
        self.req_sync = req_sync
        self.on_packet = on_packet
        self.buffer: list[Flit] = []
        self.req = 0
        self._ci_ack = 0
        self._waiting: Optional[Flit] = None
        link.receiver = self._offer

    def _offer(self, flit: Flit) -> None:
        self._waiting = flit
        self._drain()

    def _drain(self) -> None:
        if self._waiting is None or len(self.buffer) >= FLITS_PER_PACKET:
            return
        self.buffer.append(self._waiting)
        self._waiting = None
        self.link.accept()
        self._maybe_request()

    def _maybe_request(self) -> None:
        if (len(self.buffer) == FLITS_PER_PACKET and self.req == 0
                and self._ci_ack == 0):
            if self.on_packet:
                self.on_packet()
            self._set_req(1)

    def _set_req(self, level: int) -> None:
        self.req = level
        self.sim.record(self.name, TraceKind.HANDSHAKE, sig="req", level=level)
        self.req_sync.change(level)

    def ack_seen(self, level: int) -> None:
        self._ci_ack = level
        if level:
            # core interface has latched the packet
            self.buffer = []
            self._set_req(0)
            self._drain()
        else:
            self._maybe_request()


# --------------------------------------------------------------------------
# core interface

class _Envelope:
    """Clocked side of a CI/NI envelope: drives one level across the boundary."""

    def __init__(self, sim: Simulator, name: str, sig: str, delay: int,
                 far: Callable[[int], None]):
        self.sim = sim
        self.name = name
        self.sig = sig
        self.delay = delay
        self.far = far
        self.level = 0

    def drive(self, level: int) -> None:
        if level == self.level:
            return
        self.level = level
        self.sim.record(self.name, TraceKind.HANDSHAKE, sig=self.sig, level=level)
        self.sim.after(self.delay, lambda: self.far(level), self.name)


class _Unit:
    """A clocked FSM with traced state changes."""

    def __init__(self, sim: Simulator, name: str):
        self.sim = sim
        self.name = name
        self.state = NaFsmState.WAIT

    def goto(self, state: NaFsmState) -> None:
        if state is not self.state:
            self.state = state
            self.sim.record(self.name, TraceKind.STATE, state=state.value)


class MasterAdapter:
    """Master NA: WISHBONE slave port towards the master core, NoC endpoint
    towards the router.

    ``pe`` is the master processing element's flow-control object; it is told
    about each send and decides whether a returning response completes the
    core's cycle.
    """

    def __init__(self, sim: Simulator, name: str, node: int, dims: MeshDims, lut: RouteLut,
                 inject: Channel, eject: Channel, tx_ack: Synchronizer, rx_req: Synchronizer,
                 delay: int):
        self.sim = sim
        self.name = name
        self.node = node
        self.dims = dims
        self.lut = lut
        self.counters = AdapterCounters()
        self.pe = None
        self.on_local_failure: Optional[Callable[[], None]] = None

        self.tx = _Unit(sim, f"{name}.tx")
        self.rx = _Unit(sim, f"{name}.rx")
        self.tx_ack = tx_ack
        self.rx_req = rx_req
        self.transmitter = AsyncTransmitter(sim, f"{name}.txenv", inject, tx_ack,
                                            self._tx_flits)
        self.receiver = AsyncReceiver(sim, f"{name}.rxenv", eject, rx_req)
        self.tx_req = _Envelope(sim, f"{name}.txenv", "req", delay, self.transmitter.req_seen)
        self.rx_ack = _Envelope(sim, f"{name}.rxenv", "ack", delay, self.receiver.ack_seen)

        self._latched: Optional[WbSignals] = None
        self._packet: Optional[Packet] = None
        self._tag = 0
        self._armed = True
        self._retransmit: Optional[Packet] = None
        self._deliver: Optional[TransactionPayload] = None

    def busy(self, bus: WbSignals) -> bool:
        return (self.tx.state is not NaFsmState.WAIT or self.rx.state is not NaFsmState.WAIT
                or self._retransmit is not None or (bus.active and self._armed)
                or self.rx_req.value == 1)

    def _tx_flits(self) -> list[Flit]:
        if self._packet is None:
            raise SimulationError(f"{self.name}: transmitter read an empty packet buffer")
        return serialize(self._packet)

    def request_retransmit(self, packet: Packet) -> None:
        self._retransmit = packet

    def cancel_retransmit(self) -> None:
        self._retransmit = None

    # one rising edge; ``bus`` holds the values registered on the previous edge
    def step(self, bus: WbSignals, t: SimTime) -> dict:
        ack_level = self.tx_ack.sample(t)
        req_level = self.rx_req.sample(t)
        drive = {"ack": 0, "dat_r": 0}
        self._step_tx(bus, ack_level)
        self._step_rx(bus, req_level, drive)
        return drive

    def _step_tx(self, bus: WbSignals, ack_level: int) -> None:
        tx = self.tx
        if not bus.active:
            self._armed = True
        if tx.state is NaFsmState.WAIT:
            if self._retransmit is not None:
                # the packet is rebuilt by the PE, not re-latched from the bus
                self._packet, self._retransmit = self._retransmit, None
                self.pe.sent(self._packet.txn.tag, self._packet)
                self.counters.sent += 1
                tx.goto(NaFsmState.REQ)
                self.tx_req.drive(1)
            elif bus.active and self._armed:
                self._armed = False
                tx.goto(NaFsmState.STORE_PACKET)
        elif tx.state is NaFsmState.STORE_PACKET:
            self._latched = bus
            tx.goto(NaFsmState.ROUTE_LOOKUP)
        elif tx.state is NaFsmState.ROUTE_LOOKUP:
            self._route_lookup()
        elif tx.state is NaFsmState.REQ:
            if ack_level:
                tx.goto(NaFsmState.ACK)
                self.tx_req.drive(0)
        elif tx.state is NaFsmState.ACK:
            if not ack_level:
                tx.goto(NaFsmState.WAIT)

    def _route_lookup(self) -> None:
        s = self._latched
        try:
            entry = lut_lookup(self.lut, s.adr)
        except UnmappedPrefix:
            self.counters.unmapped_prefix += 1
            self.sim.record(self.tx.name, TraceKind.DROP, reason="unmapped", adr=f"{s.adr:08x}")
            self.tx.goto(NaFsmState.WAIT)
            self.pe.local_failure()
            return
        if entry.loopback:
            raise SimulationError(f"{self.name}: address {s.adr:#x} maps to this master's own node")
        self._tag = (self._tag + 1) & 0xFF
        kind = TxnKind.WRITE_REQUEST if s.we else TxnKind.READ_REQUEST
        txn = TransactionPayload(kind, s.adr, s.dat_w if s.we else 0, s.sel, self._tag)
        self._packet = Packet(entry.route, txn, route_between(entry.node, self.node, self.dims))
        self.pe.sent(self._tag, self._packet)
        self.counters.sent += 1
        self.tx.goto(NaFsmState.REQ)
        self.tx_req.drive(1)

    def _step_rx(self, bus: WbSignals, req_level: int, drive: dict) -> None:
        rx = self.rx
        if rx.state is NaFsmState.WAIT:
            if req_level:
                rx.goto(NaFsmState.STORE_PACKET)
        elif rx.state is NaFsmState.STORE_PACKET:
            try:
                packet = deserialize(self.receiver.buffer)
            except MalformedPacket:
                self.counters.discarded_malformed += 1
                self.sim.record(rx.name, TraceKind.DROP, reason="malformed")
                packet = None
            self.counters.received += packet is not None
            if packet is not None and packet.txn.kind.is_request:
                self.counters.discarded_malformed += 1
                packet = None
            action = FcAction.NONE
            if packet is not None:
                action = self.pe.response(packet.txn.tag)
                if action is not FcAction.COMPLETE:
                    self.counters.stale_tag += 1
                    self.sim.record(rx.name, TraceKind.DROP, reason="stale", tag=packet.txn.tag)
            if action is FcAction.COMPLETE:
                self._retransmit = None
                self._deliver = packet.txn
                rx.goto(NaFsmState.REQ)
            else:
                rx.goto(NaFsmState.ACK)
                self.rx_ack.drive(1)
        elif rx.state is NaFsmState.REQ:
            if bus.active:
                drive["ack"] = 1
                drive["dat_r"] = self._deliver.data
                self._deliver = None
                rx.goto(NaFsmState.ACK)
                self.rx_ack.drive(1)
        elif rx.state is NaFsmState.ACK:
            if not req_level:
                self.rx_ack.drive(0)
                rx.goto(NaFsmState.WAIT)


class SlaveAdapter:
    """Slave NA: NoC endpoint towards the router, WISHBONE master port towards
    the slave core. One request is handled at a time."""

    def __init__(self, sim: Simulator, name: str, node: int, inject: Channel,
                 eject: Channel, tx_ack: Synchronizer, rx_req: Synchronizer, delay: int):
        self.sim = sim
        self.name = name
        self.node = node
        self.counters = AdapterCounters()
        self.tx = _Unit(sim, f"{name}.tx")
        self.rx = _Unit(sim, f"{name}.rx")
        self.tx_ack = tx_ack
        self.rx_req = rx_req
        self.transmitter = AsyncTransmitter(sim, f"{name}.txenv", inject, tx_ack,
                                            self._tx_flits)
        self.receiver = AsyncReceiver(sim, f"{name}.rxenv", eject, rx_req)
        self.tx_req = _Envelope(sim, f"{name}.txenv", "req", delay, self.transmitter.req_seen)
        self.rx_ack = _Envelope(sim, f"{name}.rxenv", "ack", delay, self.receiver.ack_seen)
        self._request: Optional[Packet] = None
        self._response: Optional[Packet] = None
        self._packet: Optional[Packet] = None
        self.drive = {"cyc": 0, "stb": 0, "we": 0, "adr": 0, "dat_w": 0, "sel": 0}

    @property
    def busy(self) -> bool:
        return (self.tx.state is not NaFsmState.WAIT or self.rx.state is not NaFsmState.WAIT
                or self._response is not None or self.rx_req.value == 1)

    def _tx_flits(self) -> list[Flit]:
        return serialize(self._packet)

    def step(self, bus: WbSignals, t: SimTime) -> dict:
        ack_level = self.tx_ack.sample(t)
        req_level = self.rx_req.sample(t)
        self._step_rx(bus, req_level)
        self._step_tx(ack_level)
        return self.drive

    def _step_rx(self, bus: WbSignals, req_level: int) -> None:
        rx = self.rx
        if rx.state is NaFsmState.WAIT:
            if req_level and self.tx.state is NaFsmState.WAIT and self._response is None:
                rx.goto(NaFsmState.STORE_PACKET)
        elif rx.state is NaFsmState.STORE_PACKET:
            try:
                packet = deserialize(self.receiver.buffer)
            except MalformedPacket:
                packet = None
            if packet is None or not packet.txn.kind.is_request or packet.return_route.hops == 0:
                self.counters.discarded_malformed += 1
                self.sim.record(rx.name, TraceKind.DROP, reason="malformed")
                rx.goto(NaFsmState.ACK)
                self.rx_ack.drive(1)
                return
            self.counters.received += 1
            self._request = packet
            txn = packet.txn
            we = int(txn.kind is TxnKind.WRITE_REQUEST)
            self.drive = {"cyc": 1, "stb": 1, "we": we, "adr": txn.adr,
                          "dat_w": txn.data if we else 0, "sel": txn.sel}
            rx.goto(NaFsmState.REQ)
        elif rx.state is NaFsmState.REQ:
            if bus.ack and bus.stb:
                req = self._request
                data = 0 if req.txn.kind is TxnKind.WRITE_REQUEST else bus.dat_r
                self._response = Packet(req.return_route, req.txn.response(data, Status.OK))
                self._request = None
                self.drive = {"cyc": 0, "stb": 0, "we": 0, "adr": 0, "dat_w": 0, "sel": 0}
                rx.goto(NaFsmState.ACK)
                self.rx_ack.drive(1)
        elif rx.state is NaFsmState.ACK:
            if not req_level:
                self.rx_ack.drive(0)
                rx.goto(NaFsmState.WAIT)

    def _step_tx(self, ack_level: int) -> None:
        tx = self.tx
        if tx.state is NaFsmState.WAIT:
            if self._response is not None:
                tx.goto(NaFsmState.STORE_PACKET)
        elif tx.state is NaFsmState.STORE_PACKET:
            self._packet, self._response = self._response, None
            self.counters.sent += 1
            tx.goto(NaFsmState.REQ)
            self.tx_req.drive(1)
        elif tx.state is NaFsmState.REQ:
            if ack_level:
                tx.goto(NaFsmState.ACK)
                self.tx_req.drive(0)
        elif tx.state is NaFsmState.ACK:
            if not ack_level:
                tx.goto(NaFsmState.WAIT)
