import shutil
import subprocess
import sys
import time
from pathlib import Path

import pytest

from asyncnoc.cli import ExitStatus, main, run_scenario
from asyncnoc.config import load_config
from asyncnoc.stats import CSV_HEADER

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))
PAIR = next(p for p in CONFIGS if p.name == "pair_2x2.yaml")
FLOOD = next(p for p in CONFIGS if p.name == "flood_drop.yaml")


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_run_ok_quickly(path):
    t0 = time.perf_counter()
    report, outcome, _ = run_scenario(load_config(path), keep_trace=False)
    assert outcome.status is ExitStatus.OK
    assert report.delivered == report.issued > 0
    assert time.perf_counter() - t0 < 10


def test_run_writes_csv_trace_and_summary(tmp_path, capsys):
    csv_path, trace_path = tmp_path / "out.csv", tmp_path / "trace.txt"
    code = main(["run", str(PAIR), "--csv", str(csv_path), "--trace", str(trace_path),
                 "--summary"])
    out = capsys.readouterr().out
    assert code == 0
    assert csv_path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert "delivered: 4" in out and out.rstrip().endswith("status: Ok")
    trace = trace_path.read_text().splitlines()
    digest = next(l for l in out.splitlines() if l.startswith("trace_hash"))
    assert trace and digest


def test_cli_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"{k}.csv"
        assert main(["run", str(FLOOD), "--csv", str(p), "--seed", "11"]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_seed_flag_overrides_file(tmp_path, capsys):
    main(["run", str(FLOOD), "--summary"])
    a = capsys.readouterr().out
    main(["run", str(FLOOD), "--summary", "--seed", "99"])
    b = capsys.readouterr().out
    assert a != b


def test_run_failed_exit_code(tmp_path, capsys):
    text = FLOOD.read_text().replace("max_retries: 8", "max_retries: 0")
    cfg = tmp_path / "noretry.yaml"
    cfg.write_text(text)
    assert main(["run", str(cfg), "--csv", str(tmp_path / "r.csv")]) == 2
    assert "RunFailed(failed=" in capsys.readouterr().out
    assert (tmp_path / "r.csv").exists()


def test_until_flag_truncates(capsys):
    assert main(["run", str(PAIR), "--until", "200000"]) == 2


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("mesh: {cols: 5, rows: 4}\n")
    assert main(["run", str(bad)]) == 1
    assert "mesh exceeds 16 nodes" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 1


def test_sweep_over_fifo_depths(capsys):
    assert main(["sweep", str(FLOOD), "--depths", "5", "8", "--jobs", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("fifo_depth,")
    assert [l.split(",")[0] for l in lines[1:]] == ["5", "8"]


@pytest.mark.skipif(shutil.which("asyncnoc") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["asyncnoc", "run", str(PAIR)], capture_output=True, text=True)
    assert proc.returncode == 0 and "status: Ok" in proc.stdout


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "asyncnoc", "run", str(PAIR)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
