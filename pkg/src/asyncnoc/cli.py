"""Command-line scenario runner.

    asyncnoc run configs/pair_2x2.yaml --summary --csv out.csv
    asyncnoc sweep configs/flood_drop.yaml --depths 5 6 8 12
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional, Sequence

from .config import ConfigError, SimConfig, load_config
from .stats import RunReport
from .system import Simulation

__all__ = ["ExitStatus", "Outcome", "run_scenario", "main"]


class ExitStatus(IntEnum):
    OK = 0
    CONFIG_ERROR = 1
    RUN_FAILED = 2


@dataclass(frozen=True)
class Outcome:
    status: ExitStatus
    failed: int = 0
    violations: int = 0

    def __str__(self) -> str:
        if self.status is ExitStatus.RUN_FAILED:
            return f"RunFailed(failed={self.failed}, violations={self.violations})"
        return "Ok" if self.status is ExitStatus.OK else "ConfigError"


def run_scenario(cfg: SimConfig, keep_trace: bool = True
                 ) -> tuple[RunReport, Outcome, Simulation]:
    """Build and run one scenario. Ok only with no failed transactions and no violations."""
    sim = Simulation(cfg, keep_trace=keep_trace)
    report = sim.run()
    failed, violations = report.failed, len(report.violations)
    if failed or violations:
        return report, Outcome(ExitStatus.RUN_FAILED, failed, violations), sim
    return report, Outcome(ExitStatus.OK), sim


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asyncnoc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("config")
    run.add_argument("--csv", metavar="PATH", help="write per-transaction CSV")
    run.add_argument("--trace", metavar="PATH", help="write the event trace")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--until", type=int, metavar="PS", help="override run_until")
    run.add_argument("--summary", action="store_true", help="print aggregate key: value lines")

    sweep = sub.add_parser("sweep", help="rerun a scenario over several FIFO depths")
    sweep.add_argument("config")
    sweep.add_argument("--depths", type=int, nargs="+", default=[5, 6, 8, 12, 16])
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--jobs", type=int, default=4)
    return p


def _load(path: str, seed: Optional[int], until: Optional[int] = None) -> SimConfig:
    cfg = load_config(path)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    if until is not None:
        cfg = replace(cfg, run_until=until)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args.config, args.seed, args.until)
    report, outcome, sim = run_scenario(cfg, keep_trace=args.trace is not None)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.emit_csv())
    if args.trace:
        sim.trace.dump(args.trace)
    if args.summary:
        sys.stdout.write(report.summary_text())
    print(f"status: {outcome}")
    return int(outcome.status)


def _cmd_sweep(args) -> int:
    base = _load(args.config, args.seed)
    if min(args.depths) < 5:
        raise ConfigError("router.fifo_depth must be >= 5", source=args.config)

    def one(depth: int):
        cfg = replace(base, router=replace(base.router, fifo_depth=depth))
        report, outcome, _ = run_scenario(cfg, keep_trace=False)
        return depth, report, outcome

    worst = ExitStatus.OK
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(one, args.depths))
    print("fifo_depth,delivered,failed,drops,retransmits,latency_mean_ps,status")
    for depth, report, outcome in rows:
        s = report.summary()
        print(f"{depth},{s['delivered']},{s['failed']},{s['drops']},{s['retransmits']},"
              f"{s['latency_mean_ps']},{outcome}")
        worst = max(worst, outcome.status)
    return int(worst)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return int(ExitStatus.CONFIG_ERROR)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return int(ExitStatus.CONFIG_ERROR)


if __name__ == "__main__":
    sys.exit(main())
