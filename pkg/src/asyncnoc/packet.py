"""Five-flit packet format carrying one WISHBONE transaction.

    Head   forward route, packed 2-bit hop codes
    Body1  return route (requests only)
    Body2  ADR
    Body3  DAT (write data or read data)
    Tail   kind[1:0] sel[5:2] tag[13:6] status[14] route_hops[19:15] return_hops[24:20]
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .topology import EMPTY_ROUTE, RouteError, SourceRoute

__all__ = [
    "FlitKind", "Flit", "TxnKind", "Status", "TransactionPayload", "Packet",
    "MalformedPacket", "FLITS_PER_PACKET", "serialize", "deserialize",
]

FLITS_PER_PACKET = 5
WORD_MASK = 0xFFFF_FFFF


class MalformedPacket(ValueError):
    pass


class FlitKind(enum.Enum):
    HEAD = "H"
    BODY = "B"
    TAIL = "T"


@dataclass(frozen=True)
class Flit:
    kind: FlitKind
    payload: int

    def __post_init__(self):
        if not 0 <= self.payload <= WORD_MASK:
            raise ValueError(f"flit payload {self.payload:#x} is not a 32-bit word")


class TxnKind(enum.IntEnum):
    READ_REQUEST = 0
    WRITE_REQUEST = 1
    READ_RESPONSE = 2
    WRITE_ACK = 3

    @property
    def is_request(self) -> bool:
        return self in (TxnKind.READ_REQUEST, TxnKind.WRITE_REQUEST)


class Status(enum.IntEnum):
    OK = 0
    ERR = 1


@dataclass(frozen=True)
class TransactionPayload:
    kind: TxnKind
    adr: int = 0
    data: int = 0
    sel: int = 0xF
    tag: int = 0
    status: Status = Status.OK

    def __post_init__(self):
        if not 0 <= self.adr <= WORD_MASK or not 0 <= self.data <= WORD_MASK:
            raise ValueError("adr/data must be 32-bit words")
        if not 0 <= self.sel <= 0xF:
            raise ValueError("sel is 4 bits")
        if not 0 <= self.tag <= 0xFF:
            raise ValueError("tag is 8 bits")

    def response(self, data: int = 0, status: Status = Status.OK) -> "TransactionPayload":
        if self.kind is TxnKind.WRITE_REQUEST:
            return TransactionPayload(TxnKind.WRITE_ACK, self.adr, 0, self.sel, self.tag, status)
        if self.kind is TxnKind.READ_REQUEST:
            return TransactionPayload(TxnKind.READ_RESPONSE, self.adr, data, self.sel, self.tag, status)
        raise ValueError(f"{self.kind.name} is not a request")


@dataclass(frozen=True)
class Packet:
    route: SourceRoute
    txn: TransactionPayload
    return_route: SourceRoute = field(default=EMPTY_ROUTE)


def serialize(p: Packet) -> list[Flit]:
    t = p.txn
    tail = (int(t.kind)
            | t.sel << 2
            | t.tag << 6
            | int(t.status) << 14
            | p.route.hops << 15
            | p.return_route.hops << 20)
    return [
        Flit(FlitKind.HEAD, p.route.packed),
        Flit(FlitKind.BODY, p.return_route.packed),
        Flit(FlitKind.BODY, t.adr),
        Flit(FlitKind.BODY, t.data),
        Flit(FlitKind.TAIL, tail),
    ]


_EXPECTED_KINDS = [FlitKind.HEAD, FlitKind.BODY, FlitKind.BODY, FlitKind.BODY, FlitKind.TAIL]


def deserialize(flits: list[Flit]) -> Packet:
    if len(flits) != FLITS_PER_PACKET:
        raise MalformedPacket(f"expected {FLITS_PER_PACKET} flits, got {len(flits)}")
    kinds = [f.kind for f in flits]
    if kinds != _EXPECTED_KINDS:
        raise MalformedPacket("flit kinds out of order: " + "".join(k.value for k in kinds))
    head, ret, adr, data, tail = (f.payload for f in flits)
    if tail >> 25:
        raise MalformedPacket(f"tail flit {tail:#x} has reserved bits set")
    try:
        route = SourceRoute(head, (tail >> 15) & 0x1F)
        return_route = SourceRoute(ret, (tail >> 20) & 0x1F)
    except RouteError as exc:
        raise MalformedPacket(str(exc)) from exc
    txn = TransactionPayload(
        kind=TxnKind(tail & 0b11),
        adr=adr,
        data=data,
        sel=(tail >> 2) & 0xF,
        tag=(tail >> 6) & 0xFF,
        status=Status((tail >> 14) & 1),
    )
    return Packet(route, txn, return_route)
