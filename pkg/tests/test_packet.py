import pytest
from hypothesis import given, strategies as st

from asyncnoc.packet import (FLITS_PER_PACKET, Flit, FlitKind, MalformedPacket, Packet, Status,
                             TransactionPayload, TxnKind, deserialize, serialize)
from asyncnoc.topology import EMPTY_ROUTE, MAX_HOPS, SourceRoute

word = st.integers(0, 0xFFFF_FFFF)


@st.composite
def routes(draw):
    hops = draw(st.integers(0, MAX_HOPS))
    return SourceRoute(draw(st.integers(0, (1 << (2 * hops)) - 1)), hops)


packets = st.builds(
    Packet,
    route=routes(),
    txn=st.builds(TransactionPayload, kind=st.sampled_from(TxnKind), adr=word, data=word,
                  sel=st.integers(0, 15), tag=st.integers(0, 255),
                  status=st.sampled_from(Status)),
    return_route=routes(),
)


@given(packets)
def test_serialize_round_trip(p):
    flits = serialize(p)
    assert len(flits) == FLITS_PER_PACKET
    assert [f.kind for f in flits] == [FlitKind.HEAD] + [FlitKind.BODY] * 3 + [FlitKind.TAIL]
    assert deserialize(flits) == p


@given(packets, packets)
def test_serialize_is_injective(a, b):
    if a != b:
        assert serialize(a) != serialize(b)


def test_tail_layout():
    txn = TransactionPayload(TxnKind.READ_RESPONSE, 0x10, 0x20, sel=0b1010, tag=0xAB,
                             status=Status.ERR)
    tail = serialize(Packet(SourceRoute(0b1001, 2), txn, SourceRoute(0b11, 1)))[-1].payload
    assert tail == 2 | 0b1010 << 2 | 0xAB << 6 | 1 << 14 | 2 << 15 | 1 << 20


def test_malformed_inputs():
    good = serialize(Packet(SourceRoute(0b01, 1), TransactionPayload(TxnKind.READ_REQUEST)))
    with pytest.raises(MalformedPacket):
        deserialize(good[:4])
    with pytest.raises(MalformedPacket):
        deserialize([good[1], good[0], *good[2:]])
    with pytest.raises(MalformedPacket):
        deserialize(good[:4] + [Flit(FlitKind.TAIL, good[4].payload | 1 << 30)])
    # head carries codes past the hop count in the tail
    with pytest.raises(MalformedPacket):
        deserialize([Flit(FlitKind.HEAD, 0xFF)] + good[1:])


def test_response_keeps_tag_and_address():
    req = TransactionPayload(TxnKind.WRITE_REQUEST, 0x3000_0010, 5, sel=3, tag=9)
    ack = req.response()
    assert (ack.kind, ack.adr, ack.tag, ack.data) == (TxnKind.WRITE_ACK, req.adr, 9, 0)
    rd = TransactionPayload(TxnKind.READ_REQUEST, 4, tag=1).response(0xCAFE)
    assert rd.kind is TxnKind.READ_RESPONSE and rd.data == 0xCAFE
    with pytest.raises(ValueError):
        ack.response()


def test_field_ranges():
    with pytest.raises(ValueError):
        TransactionPayload(TxnKind.READ_REQUEST, tag=256)
    with pytest.raises(ValueError):
        Flit(FlitKind.BODY, 1 << 32)
    assert EMPTY_ROUTE.hops == 0


def test_zero_packet_one_hop_east_head():
    p = Packet(SourceRoute(1, 1), TransactionPayload(TxnKind.READ_REQUEST, sel=0))
    assert serialize(p)[0] == Flit(FlitKind.HEAD, 0x0000_0001)


def test_response_packets_have_no_return_route():
    req = TransactionPayload(TxnKind.READ_REQUEST, tag=4)
    resp = Packet(SourceRoute(0b01, 1), req.response(1))
    assert resp.return_route == EMPTY_ROUTE
    assert deserialize(serialize(resp)).txn.tag == 4
