import pytest

from asyncnoc.config import ConfigError, parse_config
from asyncnoc.router import DropPolicy

MINIMAL = """\
mesh: {cols: 2, rows: 2}
nodes:
  0: master
  3: slave
lut: {0x3: 3}
workload:
  0:
    ops:
      - {op: write, adr: 0x30000010, data: 0xDEADBEEF}
      - {op: read, adr: 0x30000010}
"""


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.node(0).period == 40_000 and cfg.node(3).role == "slave"
    assert cfg.node(1).role == "idle"
    assert cfg.router.fifo_depth == 8 and cfg.router.drop_policy is DropPolicy.DROP_ON_FULL
    assert cfg.flow_control.timeout == 1_000_000 and cfg.flow_control.max_retries == 8
    assert cfg.masters == [0] and cfg.slaves == [3]
    assert len(cfg.workload[0].ops) == 2


def error(text: str) -> ConfigError:
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "x.yaml")
    return exc.value


def test_lut_target_must_be_a_slave():
    e = error(MINIMAL.replace("lut: {0x3: 3}", "lut: {0x3: 2}"))
    assert "lut target not a slave" in str(e)
    assert e.line == 5 and str(e).startswith("x.yaml:5:")


def test_mesh_size_limit():
    assert "mesh exceeds 16 nodes" in str(error(MINIMAL.replace("cols: 2, rows: 2",
                                                                "cols: 5, rows: 4")))


def test_unknown_field_is_located():
    e = error(MINIMAL.replace("  3: slave", "  3: {role: slave, colour: red}"))
    assert "unknown field" in str(e) and "colour" in str(e) and e.line == 4


def test_unparseable_values():
    assert error(MINIMAL + "seed: banana\n").line == 11
    assert "unparseable" in str(error("mesh: [1, 2\n"))
    assert "fifo_depth" in str(error(MINIMAL + "router: {fifo_depth: 4}\n"))
    assert "drop_policy" in str(error(MINIMAL + "router: {drop_policy: sometimes}\n"))


def test_workload_prefix_must_be_mapped():
    e = error(MINIMAL.replace("adr: 0x30000010}", "adr: 0x50000010}", 1))
    assert "has no lut entry" in str(e) and e.line is not None


def test_workload_on_non_master_rejected():
    assert "master" in str(error(MINIMAL.replace("workload:\n  0:", "workload:\n  3:")))


def test_random_workload_section():
    cfg = parse_config(MINIMAL.split("workload:")[0]
                       + "workload:\n  0: {random: {count: 4, words: 2}}\nseed: 5\n")
    wl = cfg.workload[0]
    assert wl.mode == "random" and wl.count == 4 and wl.slaves == (3,)
    assert len(wl.resolve(0, cfg.seed)) == 8


def test_phase_must_be_below_period():
    assert "phase" in str(error(MINIMAL.replace("  0: master",
                                                "  0: {role: master, phase: 40000}")))


def test_empty_config():
    assert "empty" in str(error(""))
