import pytest

from asyncnoc.handshake import AsyncPort, Channel, handshake_violations
from asyncnoc.kernel import SimulationError, Simulator, TraceKind, TraceRecord
from asyncnoc.packet import Flit, FlitKind


def test_four_phase_cycle_timing():
    sim = Simulator()
    ch = Channel(sim, "c", delay=1000)
    got, done = [], []
    ch.receiver = lambda f: (got.append((sim.now, f)), ch.accept())
    ch.send(Flit(FlitKind.HEAD, 7), lambda: done.append(sim.now))
    sim.run_until(10**6)
    assert got == [(1000, Flit(FlitKind.HEAD, 7))]
    assert done == [4000]
    edges = [(r.time, r.get("sig"), r.get("level")) for r in sim.trace
             if r.kind is TraceKind.HANDSHAKE]
    assert edges == [(0, "req", "1"), (1000, "ack", "1"), (2000, "req", "0"),
                     (3000, "ack", "0")]
    assert handshake_violations(sim.trace.records) == []
    assert ch.port == AsyncPort()


def test_send_while_busy_raises():
    sim = Simulator()
    ch = Channel(sim, "c")
    ch.receiver = lambda f: None
    ch.send(Flit(FlitKind.HEAD, 0), lambda: None)
    with pytest.raises(SimulationError):
        ch.send(Flit(FlitKind.BODY, 0), lambda: None)


def test_slow_responder_stretches_handshake():
    sim = Simulator()
    ch = Channel(sim, "c", delay=10)
    ch.receiver = lambda f: sim.after(500, ch.accept)
    done = []
    ch.send(Flit(FlitKind.TAIL, 1), lambda: done.append(sim.now))
    sim.run_until(10_000)
    assert done == [10 + 500 + 30]


def test_accept_out_of_order_raises():
    sim = Simulator()
    ch = Channel(sim, "c")
    with pytest.raises(SimulationError):
        ch.accept()


def test_disconnected_channel_freezes_with_req_high():
    sim = Simulator()
    ch = Channel(sim, "c")
    ch.receiver = lambda f: ch.accept()
    ch.disconnected = True
    done = []
    ch.send(Flit(FlitKind.HEAD, 0), lambda: done.append(1))
    sim.run_until(10**6)
    assert done == [] and ch.port.req == 1 and ch.port.ack == 0


def _rec(t, sig, level, ch="c"):
    return TraceRecord(t, ch, TraceKind.HANDSHAKE, (("sig", sig), ("level", str(level))))


def test_violation_detector_flags_order_and_time():
    assert handshake_violations([_rec(0, "ack", 1)])
    assert handshake_violations([_rec(5, "req", 1), _rec(5, "ack", 1)])
    ok = [_rec(1, "req", 1), _rec(2, "ack", 1), _rec(3, "req", 0), _rec(4, "ack", 0)]
    assert handshake_violations(ok) == []
