import csv
import io
import json

import pytest

from krylovperf.cli import bench_cells, fit_loglog_slope, main, parse_params, resolve_measure


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_eval_both_methods(capsys):
    assert main(["eval", "--model", "queue", "--param", "n=1024", "--measure",
                 "average-clients", "--t", "1", "--method", "both"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [r["method"] for r in rows] == ["krylov", "uniformization"]
    a, b = (float(r["value"]) for r in rows)
    assert abs(a - b) < 1e-6
    assert rows[0]["n"] == "1024" and rows[0]["converged"] == "True"


def test_param_sweep(capsys):
    assert main(["eval", "--model", "telecom", "--param", "n=4,8,16", "--measure", "D",
                 "--t", "20"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [r["n"] for r in rows] == ["9", "17", "33"]


def test_sensitivity_row(capsys):
    assert main(["sensitivity", "--model", "queue", "--param", "n=64", "--direction",
                 "queue:rho2", "--measure", "average-clients", "--t", "1"]) == 0
    row = _rows(capsys.readouterr().out)[0]
    assert float(row["derivative"]) > 0 and float(row["value"]) > 0


def test_export_and_reload(tmp_path, capsys):
    prefix = tmp_path / "att"
    assert main(["model", "export", "--model", "attack", "--param", "N=3", "--out", str(prefix)]) == 0
    meta = json.loads((tmp_path / "att.json").read_text())
    assert meta["n"] == 13 and "failed" in meta["partitions"]
    capsys.readouterr()
    assert main(["eval", "--model", str(tmp_path / "att.mtx"), "--measure", "mttf"]) == 0
    from_file = float(_rows(capsys.readouterr().out)[0]["value"])
    assert main(["eval", "--model", "attack", "--param", "N=3", "--measure", "mttf"]) == 0
    built = float(_rows(capsys.readouterr().out)[0]["value"])
    assert from_file == pytest.approx(built, rel=1e-12)


def test_invalid_measure_exit_code(capsys):
    assert main(["eval", "--model", "queue", "--measure", '{"kind": "Bogus"}']) == 1
    err = capsys.readouterr().err
    assert err.startswith("krylovperf: error=SpecError") and err.count("\n") == 1


def test_nonconvergence_exit_code(capsys):
    code = main(["eval", "--model", "queue", "--param", "n=512", "--measure", "average-clients",
                 "--t", "50", "--restart-len", "2", "--max-restarts", "1"])
    assert code == 2
    out = capsys.readouterr()
    assert "ConvergenceError" in out.err
    assert _rows(out.out)[0]["converged"] == "False"


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--suite", "queue,sensitivity", "--max-exp", "11", "--sens-max-exp", "9",
                 "--out", str(out), "--jobs", "2"]) == 0
    rows = _rows(out.read_text())
    assert [(r["suite"], r["n"]) for r in rows] == [
        ("queue", "1024"), ("queue", "2048"), ("sensitivity", "256"), ("sensitivity", "512")]
    assert all(r["status"] == "ok" for r in rows)


def test_helpers():
    assert parse_params(["n=1,2", "rho2=3"]) == [{"n": "1", "rho2": "3"}, {"n": "2", "rho2": "3"}]
    assert resolve_measure("InstReward", 2)["t"] == 2.0
    assert len(bench_cells(["queue"], max_exp=12)) == 3
    assert fit_loglog_slope([10, 100, 1000], [1, 10, 100]) == pytest.approx(1.0)
