from dataclasses import replace

import pytest

from scenarios import single

from asyncnoc.adapter import (NaFsmState, UnmappedPrefix, build_lut, lut_lookup,
                              route_between)
from asyncnoc.config import FlowControlConfig
from asyncnoc.kernel import TraceKind
from asyncnoc.system import Simulation
from asyncnoc.topology import MeshDims
from asyncnoc.wishbone import OpKind, WbOp

DIMS = MeshDims(2, 2)
WRITE_READ = [WbOp(OpKind.WRITE, 0x1000_0008, 0xBEEF), WbOp(OpKind.READ, 0x1000_0008)]


def states(sim: Simulation, component: str) -> list[str]:
    return [r.get("state") for r in sim.trace
            if r.kind is TraceKind.STATE and r.component == component]


def test_lut_maps_prefixes_to_routes():
    lut = build_lut(0, {0x3: 3, 0x0: 0}, DIMS)
    e = lut_lookup(lut, 0x3000_0000)
    assert e.node == 3 and e.route == route_between(0, 3, DIMS)
    assert lut_lookup(lut, 0x0FFF_FFFC).loopback
    with pytest.raises(UnmappedPrefix):
        lut_lookup(lut, 0x5000_0000)
    with pytest.raises(ValueError):
        build_lut(0, {16: 3}, DIMS)


def test_master_and_slave_fsm_sequences():
    sim = Simulation(single(0, 3, WRITE_READ, dims=DIMS))
    report = sim.run()
    assert [t.data for t in report.txns] == [0xBEEF, 0xBEEF]
    cycle = ["StorePacket", "RouteLookup", "Req", "Ack", "Wait"]
    assert states(sim, "n0.na.tx") == cycle * 2
    assert states(sim, "n0.na.rx") == ["StorePacket", "Req", "Ack", "Wait"] * 2
    assert states(sim, "n3.na.rx") == ["StorePacket", "Req", "Ack", "Wait"] * 2
    assert states(sim, "n3.na.tx") == ["StorePacket", "Req", "Ack", "Wait"] * 2


def test_store_and_lookup_take_one_cycle_each():
    sim = Simulation(single(0, 3, WRITE_READ, dims=DIMS))
    sim.run()
    times = [r.time for r in sim.trace if r.component == "n0.na.tx"]
    period = 40_000
    for k in range(0, len(times), 5):
        sp, rl, req = times[k:k + 3]
        assert (rl - sp, req - rl) == (period, period)


def test_unmapped_prefix_fails_locally():
    sim = Simulation(single(0, 3, [WbOp(OpKind.READ, 0x1000_0000)], dims=DIMS))
    sim.masters[0].core.ops.append(WbOp(OpKind.READ, 0x7000_0000))
    report = sim.run()
    assert [t.outcome for t in report.txns] == ["Completed", "Failed"]
    assert report.adapter_counters["n0.na"]["unmapped_prefix"] == 1
    assert report.injected == 2          # request + response of the good read only


def test_disconnected_inject_freezes_in_req_then_flow_control_gives_up():
    cfg = single(0, 3, [WbOp(OpKind.WRITE, 0x1000_0000, 1)], dims=DIMS)
    cfg = replace(cfg, flow_control=FlowControlConfig(timeout=1_000_000, max_retries=2))
    sim = Simulation(cfg)
    sim.masters[0].inject.disconnected = True
    report = sim.run(until=10_000_000)
    adapter = sim.masters[0].adapter
    assert adapter.tx.state is NaFsmState.REQ
    assert states(sim, "n0.na.tx") == ["StorePacket", "RouteLookup", "Req"]
    retx = [(r.time, r.get("attempt") or r.get("outcome")) for r in sim.trace
            if r.kind is TraceKind.RETRANSMIT]
    issued = report.txns[0].issued_at
    assert [a for _, a in retx] == ["1", "2", "fail"]
    assert retx[-1][0] - retx[0][0] == 2_000_000
    assert retx[0][0] > issued
    assert report.txns[0].outcome == "Failed" and report.injected == 0


def test_slow_slave_triggers_retransmit_and_stale_response():
    # 30 wait states keep the first response out beyond the 1 us timeout
    cfg = single(0, 3, WRITE_READ, dims=DIMS)
    cfg = replace(cfg, nodes={0: cfg.nodes[0], 3: replace(cfg.nodes[3], wait_states=30)})
    sim = Simulation(cfg)
    report = sim.run()
    assert report.retransmits >= 1
    assert [t.outcome for t in report.txns] == ["Completed", "Completed"]
    assert report.txns[1].data == 0xBEEF
    assert sim.masters[0].flow.state.stale >= 1
    # the duplicated write lands twice with the same value
    assert sim.slaves[3].memory.writes >= 2
    assert sim.slaves[3].memory.read(0x1000_0008) == 0xBEEF


def test_retransmission_reuses_the_tag():
    cfg = single(0, 3, WRITE_READ[:1], dims=DIMS)
    cfg = replace(cfg, nodes={0: cfg.nodes[0], 3: replace(cfg.nodes[3], wait_states=30)})
    sim = Simulation(cfg)
    sim.run()
    tails = [int(r.get("data"), 16) for r in sim.trace
             if r.kind is TraceKind.FLIT and r.component == "n0.inj" and r.get("flit") == "T"]
    assert len(tails) >= 2
    assert len({(t >> 6) & 0xFF for t in tails}) == 1


def test_idle_bus_keeps_transmitter_in_wait():
    ops = [WbOp(OpKind.WRITE, 0x1000_0000, 1, delay=100)]
    sim = Simulation(single(0, 3, ops, dims=DIMS))
    report = sim.run()
    first = next(r.time for r in sim.trace if r.component == "n0.na.tx")
    assert first >= 100 * 40_000
    assert report.txns[0].outcome == "Completed"


def test_response_tags_match_request_tags():
    ops = [WbOp(OpKind.WRITE, 0x1000_0000 + 4 * k, k) for k in range(5)]
    sim = Simulation(single(0, 3, ops, dims=DIMS))
    sim.run()

    def tags(channel):
        return [(int(r.get("data"), 16) >> 6) & 0xFF for r in sim.trace
                if r.kind is TraceKind.FLIT and r.component == channel and r.get("flit") == "T"]

    sent, answered = tags("n0.inj"), tags("r0.L")
    assert sent == answered == [1, 2, 3, 4, 5]


def test_slave_bus_sees_one_compliant_cycle_per_request():
    sim = Simulation(single(0, 3, WRITE_READ, dims=DIMS))
    report = sim.run()
    assert sim.slaves[3].checker.violations == [] and report.violations == []
    starts = [r for r in sim.trace if r.component == "n3.wb" and r.get("stb") == "1"]
    assert len(starts) == 2
