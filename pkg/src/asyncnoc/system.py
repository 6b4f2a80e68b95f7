"""Assemble a full mesh from a ``SimConfig`` and run it."""

from __future__ import annotations

from dataclasses import asdict
from typing import Optional

from .adapter import MasterAdapter, SlaveAdapter, build_lut
from .config import SimConfig
from .handshake import Channel
from .kernel import Clock, ClockDomain, Simulator, SimTime, Synchronizer, TraceKind
from .packet import Flit, FlitKind
from .router import Router
from .stats import RunReport, TxnRecord
from .topology import COMPASS, Direction, coord_of, hop_distance, index_of, neighbor, opposite
from .wishbone import (IDLE_BUS, CompletedOp, FlowControl, FlowControlState, MasterCore,
                       OpKind, SlaveMemory, WbOp, WbSignals, WishboneChecker)

__all__ = ["MasterNode", "SlaveNode", "Simulation", "simulate"]


def _bus_record(sim: Simulator, name: str, old: WbSignals, new: WbSignals) -> None:
    changed = {f: getattr(new, f) for f in ("cyc", "stb", "we", "ack")
               if getattr(new, f) != getattr(old, f)}
    if not changed:
        return
    sim.record(name, TraceKind.WB, **changed, adr=f"{new.adr:08x}",
               dat_w=f"{new.dat_w:08x}", dat_r=f"{new.dat_r:08x}", sel=f"{new.sel:x}")


class _Node:
    def __init__(self, sim: Simulator, system: "Simulation", index: int, period: int,
                 phase: int):
        self.sim = sim
        self.system = system
        self.index = index
        self.name = f"n{index}"
        self.domain = ClockDomain(f"clk{index}", period, phase)
        self.clock = Clock(sim, self.domain, self._edge)
        self.bus = IDLE_BUS
        self.checker = WishboneChecker(f"{self.name}.wb", sim)
        delay = system.cfg.router.channel_delay
        self.inject = Channel(sim, f"{self.name}.inj", delay)
        self.eject = Channel(sim, f"r{index}.L", delay)
        self.tx_ack = Synchronizer(sim, f"{self.name}.sync.txack", self.domain,
                                   wake=self.clock.wake_at)
        self.rx_req = Synchronizer(sim, f"{self.name}.sync.rxreq", self.domain,
                                   wake=self.clock.wake_at)

    def _edge(self, t: SimTime) -> bool:
        raise NotImplementedError

    def _commit(self, new: WbSignals, t: SimTime) -> None:
        # The checker sees each value as it is registered, so a bus left in
        # an illegal state by a sleeping clock is still caught.
        if new != self.bus:
            _bus_record(self.sim, self.checker.name, self.bus, new)
            self.bus = new
        for v in self.checker.observe(new, t):
            self.system.report.record("violation", violation=v)


class MasterNode(_Node):
    """Master core + flow control + master NA on one clock."""

    def __init__(self, sim: Simulator, system: "Simulation", index: int, period: int,
                 phase: int, ops: list[WbOp]):
        super().__init__(sim, system, index, period, phase)
        cfg = system.cfg
        lut = build_lut(index, cfg.lut, cfg.mesh)
        self.adapter = MasterAdapter(sim, f"{self.name}.na", index, cfg.mesh, lut,
                                     self.inject, self.eject, self.tx_ack, self.rx_req,
                                     cfg.router.channel_delay)
        self.flow = FlowControl(sim, f"{self.name}.pe",
                                FlowControlState(cfg.flow_control.timeout,
                                                 cfg.flow_control.max_retries),
                                on_retransmit=self._retransmit, on_fail=self._fail)
        self.adapter.pe = self.flow
        self.core = MasterCore(f"{self.name}.core", ops, on_issue=self._issued,
                               on_done=self._done)
        self._txn: Optional[TxnRecord] = None
        self._retx_at_issue = 0

    def _retransmit(self, packet) -> None:
        self.system.report.record("retransmit")
        self.adapter.request_retransmit(packet)
        self.clock.wake()

    def _fail(self) -> None:
        self.adapter.cancel_retransmit()
        self.core.abort()
        self.clock.wake()

    def _issued(self, op: WbOp, t: SimTime) -> None:
        cfg = self.system.cfg
        slave = cfg.lut.get((op.adr >> 28) & 0xF, self.index)
        hops = hop_distance(coord_of(self.index, cfg.mesh), coord_of(slave, cfg.mesh))
        self._txn = self.system.report.issue(self.index, slave, op.kind.name.capitalize(), t,
                                             hops, op.adr, op.data)
        self._retx_at_issue = self.flow.state.retransmits

    def _done(self, done: CompletedOp) -> None:
        rec = self._txn
        rec.completed_at = done.completed_at
        rec.retransmits = self.flow.state.retransmits - self._retx_at_issue
        rec.outcome = "Failed" if done.failed else "Completed"
        if done.op.kind is OpKind.READ:
            rec.data = done.dat_r
        self._txn = None

    def _edge(self, t: SimTime) -> bool:
        bus = self.bus
        core = self.core.step(bus, t)
        na = self.adapter.step(bus, t)
        new = WbSignals(**core, **na)
        self._commit(new, t)
        return self.core.wants_edge or self.adapter.busy(new) or bool(new.ack)


class SlaveNode(_Node):
    """Slave NA driving a memory core on one clock."""

    def __init__(self, sim: Simulator, system: "Simulation", index: int, period: int,
                 phase: int, wait_states: int, base: int):
        super().__init__(sim, system, index, period, phase)
        self.adapter = SlaveAdapter(sim, f"{self.name}.na", index, self.inject, self.eject,
                                    self.tx_ack, self.rx_req, system.cfg.router.channel_delay)
        self.memory = SlaveMemory(base=base, wait_states=wait_states)

    def _edge(self, t: SimTime) -> bool:
        bus = self.bus
        na = self.adapter.step(bus, t)
        mem = self.memory.step(bus, t)
        new = WbSignals(**na, **mem)
        self._commit(new, t)
        return self.adapter.busy or self.memory.busy or new.active or bool(new.ack)


class Simulation:
    """One configured mesh. Build once, ``run()`` once."""

    def __init__(self, cfg: SimConfig, keep_trace: bool = True):
        self.cfg = cfg
        self.sim = Simulator(keep_trace=keep_trace)
        self.report = RunReport()
        self.routers: list[Router] = []
        self.masters: dict[int, MasterNode] = {}
        self.slaves: dict[int, SlaveNode] = {}
        self.links: dict[str, Channel] = {}
        self._build()

    def _build(self) -> None:
        cfg, sim = self.cfg, self.sim
        dims = cfg.mesh
        for i in range(dims.nodes):
            router = Router(sim, f"r{i}", cfg.router,
                            on_drop=lambda reason: self.report.record("drop", reason=reason))
            self.routers.append(router)
        for i, router in enumerate(self.routers):
            here = coord_of(i, dims)
            for d in COMPASS:
                there = neighbor(here, d, dims)
                if there is None:
                    continue
                j = index_of(there, dims)
                ch = Channel(sim, f"r{i}.{d.short}", cfg.router.channel_delay)
                router.attach_output(d, ch)
                self.routers[j].attach_input(opposite(d), ch)
                self.links[ch.name] = ch

        prefix_of = {}
        for prefix, node in cfg.lut.items():
            prefix_of.setdefault(node, prefix)
        for i in range(dims.nodes):
            n = cfg.node(i)
            if n.role == "master":
                wl = cfg.workload.get(i)
                ops = wl.resolve(i, cfg.seed) if wl is not None else []
                node = self.masters[i] = MasterNode(sim, self, i, n.period, n.phase, ops)
            elif n.role == "slave":
                node = self.slaves[i] = SlaveNode(sim, self, i, n.period, n.phase,
                                                  n.wait_states, prefix_of.get(i, 0) << 28)
            else:
                continue
            router = self.routers[i]
            router.attach_input(Direction.LOCAL, node.inject)
            router.attach_output(Direction.LOCAL, node.eject)
            node.inject.on_accept = self._count_injection
            node.eject.on_accept = self._count_delivery
            self.links[node.inject.name] = node.inject
            self.links[node.eject.name] = node.eject

    def _count_injection(self, flit: Flit) -> None:
        if flit.kind is FlitKind.HEAD:
            self.report.record("injection")

    def _count_delivery(self, flit: Flit) -> None:
        if flit.kind is FlitKind.TAIL:
            self.report.record("delivery")

    @property
    def nodes(self):
        return {**self.masters, **self.slaves}

    def run(self, until: Optional[SimTime] = None) -> RunReport:
        for i in sorted(self.nodes):
            self.nodes[i].clock.start()
        self.sim.run_until(self.cfg.run_until if until is None else until)
        return self.finish()

    def finish(self) -> RunReport:
        report = self.report
        for rec in report.txns:
            if rec.outcome == "Pending":
                rec.outcome = "Failed"
        report.router_counters = {r.name: asdict(r.counters) for r in self.routers}
        report.adapter_counters = {n.adapter.name: asdict(n.adapter.counters)
                                   for _, n in sorted(self.nodes.items())}
        report.trace_hash = self.sim.trace.digest
        report.end_time = self.sim.now
        return report

    @property
    def trace(self):
        return self.sim.trace


def simulate(cfg: SimConfig, keep_trace: bool = True) -> tuple[Simulation, RunReport]:
    s = Simulation(cfg, keep_trace)
    return s, s.run()
