"""CLI surface, exit codes and output files."""

import csv
import json
from pathlib import Path

import pytest

from tsnsim.cli import main
from tsnsim.runner import RunFailure, run_matrix
from tsnsim.scenario import parse_text

TINY = Path(__file__).parent / "data" / "tiny.yaml"


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_writes_kpi_and_summary(tmp_path, capsys):
    out = tmp_path / "r"
    log = tmp_path / "events.log"
    assert main(["run", str(TINY), "--mode", "frozen", "--fp", "with-hr", "--seed", "4",
                 "--duration", "5ms", "--out", str(out), "--event-log", str(log)]) == 0
    rows = _rows(out / "kpi.csv")
    assert [r["flow_id"] for r in rows] == ["tt1", "a1", "a2"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["credit_mode"] == "frozen" and summary["fp"] == "with-hr"
    assert summary["seed"] == 4 and summary["duration_ns"] == 5_000_000
    assert summary["classes"]["TT"]["max_smj_ns"] == 0
    assert len(log.read_text().splitlines()) == summary["events"]
    assert "max SMD" in capsys.readouterr().out


def test_trace_writes_trace_csv(tmp_path):
    out = tmp_path / "t"
    assert main(["trace", str(TINY), "--duration", "2ms", "--port", "SW1->ES3",
                 "--out", str(out)]) == 0
    rows = _rows(out / "trace.csv")
    assert rows and {r["port"] for r in rows} == {"SW1->ES3"}
    assert {r["class"] for r in rows} == {"A"}


def test_matrix_csv(tmp_path):
    out = tmp_path / "m"
    assert main(["matrix", str(TINY), "--modes", "nonfrozen,frozen", "--fps", "none,with-hr",
                 "--seeds", "2", "--duration", "3ms", "--out", str(out)]) == 0
    rows = _rows(out / "comparison.csv")
    assert len(rows) == 2 * 2 * 2 * 3
    assert {r["fp"] for r in rows} == {"none", "with-hr"}
    tt = [r for r in rows if r["fp"] == "with-hr" and r["class"] == "TT"]
    assert tt and all(r["smj_ns"] == "0" for r in tt)


def test_matrix_count_and_determinism():
    s = parse_text(TINY.read_text()).defaults
    scenario = parse_text(TINY.read_text())
    base = s.replace(duration=2_000_000)
    a = run_matrix(scenario, ["nonfrozen", "frozen", "return-to-zero"],
                   ["none", "with-hr", "without-hr"], [1, 2], base=base)
    assert len(a) == 18
    b = run_matrix(scenario, ["return-to-zero"], ["without-hr"], [2], base=base)
    assert b[0].matrix_rows() == a[-1].matrix_rows()


def test_matrix_failure_names_tuple(monkeypatch):
    scenario = parse_text(TINY.read_text())
    import tsnsim.network as network

    def boom(self, until=None):
        if self.config.credit_mode.value == "frozen":
            raise RuntimeError("boom")
        return self
    monkeypatch.setattr(network.Network, "run", boom)
    with pytest.raises(RunFailure, match="frozen/none/seed1"):
        run_matrix(scenario, ["nonfrozen", "frozen"], ["none"], [1])


def test_validate_and_exit_codes(tmp_path, capsys):
    assert main(["validate", str(TINY)]) == 0
    assert "ok" in capsys.readouterr().out
    bad = tmp_path / "bad.yaml"
    bad.write_text(TINY.read_text().replace("60Mbps", "90Mbps"))
    assert main(["validate", str(bad)]) == 1
    assert "85%" in capsys.readouterr().err
    assert main(["run", str(bad)]) == 1
    assert main(["run", "no-such-scenario"]) == 1
    assert main(["run", str(TINY), "--fp", "with-hr", "--gb", "off"]) == 1


def test_run_failure_exit_code(monkeypatch, tmp_path):
    import tsnsim.network as network

    def boom(self, until=None):
        raise RuntimeError("boom")
    monkeypatch.setattr(network.Network, "run", boom)
    assert main(["run", str(TINY), "--out", str(tmp_path)]) == 2


def test_list_runs():
    assert main(["list"]) == 0
