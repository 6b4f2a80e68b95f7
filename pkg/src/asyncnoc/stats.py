"""Per-run measurement: transaction records, packet accounting and the CSV report."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from typing import Optional

from .kernel import SimulationError, SimTime

__all__ = ["TxnRecord", "RunReport", "CSV_HEADER"]

CSV_HEADER = ("txn_id", "master", "slave", "kind", "issued_ps", "completed_ps",
              "latency_ps", "hops", "retransmits", "outcome")


@dataclass
class TxnRecord:
    txn_id: int
    master: int
    slave: int
    kind: str
    issued_at: SimTime
    hops: int
    completed_at: Optional[SimTime] = None
    retransmits: int = 0
    outcome: str = "Pending"
    adr: int = 0
    data: int = 0

    @property
    def latency(self) -> Optional[int]:
        if self.completed_at is None:
            return None
        return self.completed_at - self.issued_at


@dataclass
class RunReport:
    txns: list[TxnRecord] = field(default_factory=list)
    router_counters: dict[str, dict] = field(default_factory=dict)
    adapter_counters: dict[str, dict] = field(default_factory=dict)
    injected: int = 0
    delivered_packets: int = 0
    dropped: int = 0
    malformed: int = 0
    retransmits: int = 0
    violations: list = field(default_factory=list)
    trace_hash: int = 0
    end_time: SimTime = 0

    # accounting ---------------------------------------------------------
    def record(self, event: str, **info) -> None:
        if event == "injection":
            self.injected += 1
        elif event == "delivery":
            if self.delivered_packets + self.dropped + 1 > self.injected:
                raise SimulationError("packet delivered that was never injected")
            self.delivered_packets += 1
        elif event == "drop":
            if self.delivered_packets + self.dropped + 1 > self.injected:
                raise SimulationError("packet dropped that was never injected")
            self.dropped += 1
            if info.get("reason") == "malformed":
                self.malformed += 1
        elif event == "retransmit":
            self.retransmits += 1
        elif event == "violation":
            self.violations.append(info.get("violation"))
        else:
            raise ValueError(f"unknown report event {event!r}")

    def issue(self, master: int, slave: int, kind: str, t: SimTime, hops: int,
              adr: int = 0, data: int = 0) -> TxnRecord:
        rec = TxnRecord(len(self.txns), master, slave, kind, t, hops, adr=adr, data=data)
        self.txns.append(rec)
        return rec

    @property
    def in_flight(self) -> int:
        return self.injected - self.delivered_packets - self.dropped

    # aggregates ---------------------------------------------------------
    @property
    def issued(self) -> int:
        return len(self.txns)

    @property
    def delivered(self) -> int:
        return sum(1 for r in self.txns if r.outcome == "Completed")

    @property
    def failed(self) -> int:
        return sum(1 for r in self.txns if r.outcome == "Failed")

    @property
    def latencies(self) -> list[int]:
        return [r.latency for r in self.txns if r.outcome == "Completed"]

    def latency_stats(self) -> dict:
        lat = self.latencies
        if not lat:
            return {"mean": 0, "median": 0, "max": 0}
        return {"mean": statistics.fmean(lat), "median": statistics.median(lat),
                "max": max(lat)}

    def summary(self) -> dict:
        lat = self.latency_stats()
        return {
            "issued": self.issued,
            "delivered": self.delivered,
            "failed": self.failed,
            "latency_mean_ps": round(lat["mean"], 1),
            "latency_median_ps": lat["median"],
            "latency_max_ps": lat["max"],
            "packets_injected": self.injected,
            "packets_delivered": self.delivered_packets,
            "drops": self.dropped,
            "malformed": self.malformed,
            "retransmits": self.retransmits,
            "violations": len(self.violations),
            "end_time_ps": self.end_time,
            "trace_hash": f"{self.trace_hash:016x}",
        }

    def summary_text(self) -> str:
        return "".join(f"{k}: {v}\n" for k, v in self.summary().items())

    def emit_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.txns:
            w.writerow([r.txn_id, r.master, r.slave, r.kind, r.issued_at,
                        "" if r.completed_at is None else r.completed_at,
                        "" if r.latency is None else r.latency,
                        r.hops, r.retransmits, r.outcome])
        return buf.getvalue()
