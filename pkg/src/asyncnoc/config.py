"""Scenario configuration: dataclasses plus a YAML loader with located errors.

Example::

    mesh: {cols: 2, rows: 2}
    nodes:
      0: {role: master}
      3: {role: slave, wait_states: 1}
    lut: {0x3: 3}
    router: {fifo_depth: 8, channel_delay: 1000, drop_policy: backpressure}
    flow_control: {timeout: 1000000, max_retries: 8}
    workload:
      0:
        ops:
          - {op: write, adr: 0x30000010, data: 0xDEADBEEF}
          - {op: read, adr: 0x30000010}
    seed: 1
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Optional

import yaml

from .kernel import DEFAULT_PERIOD_PS
from .router import DropPolicy, RouterConfig
from .topology import MeshDims
from .wishbone import MasterWorkload, OpKind, WbOp

__all__ = ["ConfigError", "NodeConfig", "FlowControlConfig", "SimConfig", "parse_config",
           "load_config"]

ROLES = ("master", "slave", "idle")
DEFAULT_RUN_UNTIL = 10**12


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.message = message
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class NodeConfig:
    role: str = "idle"
    period: int = DEFAULT_PERIOD_PS
    phase: int = 0
    wait_states: int = 0


@dataclass(frozen=True)
class FlowControlConfig:
    timeout: int = 1_000_000
    max_retries: int = 8


@dataclass
class SimConfig:
    mesh: MeshDims
    nodes: dict[int, NodeConfig]
    lut: dict[int, int]
    router: RouterConfig = field(default_factory=RouterConfig)
    flow_control: FlowControlConfig = field(default_factory=FlowControlConfig)
    workload: dict[int, MasterWorkload] = field(default_factory=dict)
    run_until: int = DEFAULT_RUN_UNTIL
    seed: int = 0

    def __post_init__(self):
        validate(self)

    def node(self, i: int) -> NodeConfig:
        return self.nodes.get(i, NodeConfig())

    @property
    def masters(self) -> list[int]:
        return sorted(i for i, n in self.nodes.items() if n.role == "master")

    @property
    def slaves(self) -> list[int]:
        return sorted(i for i, n in self.nodes.items() if n.role == "slave")

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)


def validate(cfg: SimConfig, lines: Optional[dict] = None, source: str = "<config>") -> None:
    lines = lines or {}

    def fail(msg: str, key: str = "") -> None:
        raise ConfigError(msg, lines.get(key), source)

    n = cfg.mesh.nodes
    for i, node in cfg.nodes.items():
        if not 0 <= i < n:
            fail(f"node {i} outside the {cfg.mesh.cols}x{cfg.mesh.rows} mesh", f"nodes.{i}")
        if node.role not in ROLES:
            fail(f"node {i}: role must be one of {', '.join(ROLES)}", f"nodes.{i}")
    for prefix, target in cfg.lut.items():
        if not 0 <= prefix < 16:
            fail(f"lut prefix {prefix} is not a 4-bit value", f"lut.{prefix}")
        if cfg.node(target).role != "slave":
            fail(f"lut target not a slave: prefix {prefix:#x} -> node {target}", f"lut.{prefix}")
    for m, wl in cfg.workload.items():
        if cfg.node(m).role != "master":
            fail(f"workload for node {m}, which is not a master", f"workload.{m}")
        for prefix in wl.slaves:
            if prefix not in cfg.lut:
                fail(f"random workload of master {m} targets unmapped prefix {prefix:#x}",
                     f"workload.{m}")
        for op in wl.ops:
            if (op.adr >> 28) & 0xF not in cfg.lut:
                fail(f"workload address {op.adr:#010x} of master {m} has no lut entry",
                     f"workload.{m}")
    if cfg.run_until <= 0:
        fail("run_until must be positive", "run_until")
    if not 0 <= cfg.seed < 2**64:
        fail("seed must be an unsigned 64-bit integer", "seed")


# ---------------------------------------------------------------------------
# YAML front end

class _Located(dict):
    """Mapping that remembers the line of each key."""

    def __init__(self):
        super().__init__()
        self.lines: dict[Any, int] = {}
        self.line = 0


def _build(node: yaml.Node, source: str):
    if isinstance(node, yaml.MappingNode):
        out = _Located()
        out.line = node.start_mark.line + 1
        for k, v in node.value:
            key = _build(k, source)
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", k.start_mark.line + 1, source)
            out[key] = _build(v, source)
            out.lines[key] = k.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_build(v, source) for v in node.value]
    return yaml.safe_load(yaml.serialize(node))


_SECTIONS = {"mesh", "nodes", "lut", "router", "flow_control", "workload", "run_until",
             "seed", "clock"}


class _Reader:
    def __init__(self, source: str):
        self.source = source
        self.lines: dict[str, int] = {}

    def fail(self, msg: str, line: Optional[int]):
        raise ConfigError(msg, line, self.source)

    def mapping(self, value, where: str, line: Optional[int]) -> _Located:
        if value is None:
            value = _Located()
            value.line = line or 0
        if not isinstance(value, dict):
            self.fail(f"{where} must be a mapping", line)
        return value

    def fields(self, m: _Located, where: str, allowed: set[str]) -> None:
        for k in m:
            if k not in allowed:
                self.fail(f"unknown field {where}.{k}" if where else f"unknown field {k}",
                          m.lines.get(k))

    def int_(self, m: _Located, key: str, where: str, default=None, minimum=None) -> int:
        if key not in m:
            if default is None:
                self.fail(f"missing field {where}.{key}", m.line)
            return default
        v = m[key]
        if isinstance(v, str):
            try:
                v = int(v.replace("_", ""), 0)
            except ValueError:
                self.fail(f"{where}.{key}: cannot parse {v!r} as an integer", m.lines[key])
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"{where}.{key}: expected an integer, got {v!r}", m.lines[key])
        if minimum is not None and v < minimum:
            self.fail(f"{where}.{key} must be >= {minimum}", m.lines[key])
        return v

    def key_int(self, k, where: str, line: Optional[int]) -> int:
        if isinstance(k, int) and not isinstance(k, bool):
            return k
        try:
            return int(str(k), 0)
        except ValueError:
            self.fail(f"{where}: key {k!r} is not an integer", line)


def parse_config(text: str, source: str = "<config>") -> SimConfig:
    try:
        root_node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"unparseable YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    if root_node is None:
        raise ConfigError("empty configuration", 1, source)
    root = _build(root_node, source)
    r = _Reader(source)
    root = r.mapping(root, "configuration", 1)
    r.fields(root, "", _SECTIONS)
    lines: dict[str, int] = {}

    mesh_m = r.mapping(root.get("mesh"), "mesh", root.lines.get("mesh", root.line))
    if "mesh" not in root:
        r.fail("missing field mesh", root.line)
    r.fields(mesh_m, "mesh", {"cols", "rows"})
    cols = r.int_(mesh_m, "cols", "mesh", minimum=1)
    rows = r.int_(mesh_m, "rows", "mesh", minimum=1)
    if cols * rows > 16:
        r.fail(f"mesh exceeds 16 nodes ({cols}x{rows})", root.lines["mesh"])
    mesh = MeshDims(cols, rows)

    clock_m = r.mapping(root.get("clock"), "clock", root.lines.get("clock"))
    r.fields(clock_m, "clock", {"period", "phase"})
    default_period = r.int_(clock_m, "period", "clock", DEFAULT_PERIOD_PS, minimum=1)
    default_phase = r.int_(clock_m, "phase", "clock", 0, minimum=0)

    nodes: dict[int, NodeConfig] = {}
    nodes_m = r.mapping(root.get("nodes"), "nodes", root.lines.get("nodes"))
    for k, v in nodes_m.items():
        line = nodes_m.lines[k]
        i = r.key_int(k, "nodes", line)
        if isinstance(v, str):
            v_m = _Located()
            v_m["role"] = v
            v_m.lines["role"] = line
            v_m.line = line
        else:
            v_m = r.mapping(v, f"nodes.{i}", line)
        r.fields(v_m, f"nodes.{i}", {"role", "period", "phase", "wait_states"})
        role = v_m.get("role", "idle")
        if role not in ROLES:
            r.fail(f"nodes.{i}.role must be one of {', '.join(ROLES)}, got {role!r}",
                   v_m.lines.get("role", line))
        period = r.int_(v_m, "period", f"nodes.{i}", default_period, minimum=1)
        phase = r.int_(v_m, "phase", f"nodes.{i}", default_phase, minimum=0)
        if phase >= period:
            r.fail(f"nodes.{i}.phase must be < period", v_m.lines.get("phase", line))
        ws = r.int_(v_m, "wait_states", f"nodes.{i}", 0, minimum=0)
        nodes[i] = NodeConfig(role, period, phase, ws)
        lines[f"nodes.{i}"] = line

    lut: dict[int, int] = {}
    lut_m = r.mapping(root.get("lut"), "lut", root.lines.get("lut"))
    for k, v in lut_m.items():
        line = lut_m.lines[k]
        prefix = r.key_int(k, "lut", line)
        holder = _Located()
        holder["target"] = v
        holder.lines["target"] = line
        lut[prefix] = r.int_(holder, "target", f"lut.{prefix}", minimum=0)
        lines[f"lut.{prefix}"] = line

    router_m = r.mapping(root.get("router"), "router", root.lines.get("router"))
    r.fields(router_m, "router", {"fifo_depth", "channel_delay", "drop_policy"})
    policy_name = router_m.get("drop_policy", DropPolicy.DROP_ON_FULL.value)
    try:
        policy = DropPolicy(str(policy_name).lower().replace("-", "_"))
    except ValueError:
        r.fail(f"router.drop_policy must be drop_on_full or backpressure, got {policy_name!r}",
               router_m.lines.get("drop_policy"))
    depth = r.int_(router_m, "fifo_depth", "router", 8, minimum=1)
    if depth < 5:
        r.fail("router.fifo_depth must hold a whole packet (>= 5 flits)",
               router_m.lines.get("fifo_depth"))
    router = RouterConfig(depth, r.int_(router_m, "channel_delay", "router", 1000, minimum=1),
                          policy)

    fc_m = r.mapping(root.get("flow_control"), "flow_control", root.lines.get("flow_control"))
    r.fields(fc_m, "flow_control", {"timeout", "max_retries"})
    fc = FlowControlConfig(r.int_(fc_m, "timeout", "flow_control", 1_000_000, minimum=1),
                           r.int_(fc_m, "max_retries", "flow_control", 8, minimum=0))

    seed = r.int_(root, "seed", "", 0, minimum=0)
    run_until = r.int_(root, "run_until", "", DEFAULT_RUN_UNTIL, minimum=1)
    lines["seed"] = root.lines.get("seed")
    lines["run_until"] = root.lines.get("run_until")

    workload: dict[int, MasterWorkload] = {}
    wl_m = r.mapping(root.get("workload"), "workload", root.lines.get("workload"))
    slave_prefixes = sorted(lut)
    for k, v in wl_m.items():
        line = wl_m.lines[k]
        m = r.key_int(k, "workload", line)
        v_m = r.mapping(v, f"workload.{m}", line)
        r.fields(v_m, f"workload.{m}", {"ops", "random"})
        lines[f"workload.{m}"] = line
        if "ops" in v_m and "random" in v_m:
            r.fail(f"workload.{m}: give either ops or random, not both", line)
        if "random" in v_m:
            rnd = r.mapping(v_m["random"], f"workload.{m}.random", v_m.lines["random"])
            r.fields(rnd, f"workload.{m}.random", {"count", "seed", "slaves", "words"})
            count = r.int_(rnd, "count", f"workload.{m}.random", minimum=0)
            wseed = r.int_(rnd, "seed", f"workload.{m}.random", -1, minimum=0)
            words = r.int_(rnd, "words", f"workload.{m}.random", 16, minimum=1)
            prefixes = slave_prefixes
            if "slaves" in rnd:
                if not isinstance(rnd["slaves"], list) or not rnd["slaves"]:
                    r.fail(f"workload.{m}.random.slaves must be a non-empty list",
                           rnd.lines["slaves"])
                prefixes = [r.key_int(p, f"workload.{m}.random.slaves", rnd.lines["slaves"])
                            for p in rnd["slaves"]]
            if not prefixes:
                r.fail(f"workload.{m}: random workload needs at least one lut entry", line)
            workload[m] = MasterWorkload(mode="random", count=count,
                                         seed=None if wseed < 0 else wseed,
                                         slaves=tuple(prefixes), words=words)
            continue
        ops_v = v_m.get("ops", [])
        if not isinstance(ops_v, list):
            r.fail(f"workload.{m}.ops must be a list", v_m.lines.get("ops", line))
        ops = []
        for j, op_v in enumerate(ops_v):
            where = f"workload.{m}.ops[{j}]"
            op_m = r.mapping(op_v, where, v_m.lines.get("ops", line))
            r.fields(op_m, where, {"op", "adr", "data", "sel", "delay"})
            kind_s = str(op_m.get("op", "")).lower()
            if kind_s not in ("read", "write"):
                r.fail(f"{where}.op must be read or write", op_m.line)
            adr = r.int_(op_m, "adr", where, minimum=0)
            data = r.int_(op_m, "data", where, 0, minimum=0)
            sel = r.int_(op_m, "sel", where, 0xF, minimum=1)
            if adr > 0xFFFF_FFFF or data > 0xFFFF_FFFF or sel > 0xF:
                r.fail(f"{where}: adr/data are 32-bit, sel is 4-bit", op_m.line)
            delay = r.int_(op_m, "delay", where, 0, minimum=0)
            ops.append(WbOp(OpKind(kind_s), adr, data, sel, delay))
        workload[m] = MasterWorkload(ops)

    cfg = SimConfig.__new__(SimConfig)
    cfg.mesh, cfg.nodes, cfg.lut = mesh, nodes, lut
    cfg.router, cfg.flow_control, cfg.workload = router, fc, workload
    cfg.run_until, cfg.seed = run_until, seed
    validate(cfg, lines, source)
    return cfg


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))
