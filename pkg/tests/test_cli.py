import argparse
import csv
import filecmp
import json

import pytest

from mnldesign.cli import bench_table, main, parse_seeds, worker_count


def test_parse_seeds():
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("1,4,7") == [1, 4, 7]
    assert parse_seeds("5") == [5]
    assert parse_seeds("0-1,9") == [0, 1, 9]
    with pytest.raises(argparse.ArgumentTypeError):
        parse_seeds("4-2")


def test_worker_count(monkeypatch):
    ns = argparse.Namespace
    assert worker_count(ns(deterministic=True, workers=4)) == 1
    assert worker_count(ns(deterministic=False, workers=3)) == 3
    monkeypatch.setenv("MNLDESIGN_WORKERS", "2")
    assert worker_count(ns(deterministic=False, workers=None)) == 2


def test_bench_table_marks_timeouts():
    runs = [(30, 3, "brute", 0, 1.0, "ok", 0.0), (30, 3, "brute", 1, 3.0, "ok", 0.0),
            (30, 3, "milp", 0, 9.0, "timeout", 0.0)]
    rows = bench_table(runs)
    assert rows[0] == [30, 3, 4060, "brute", "2.000000", "1.414214", 2]
    assert rows[1] == [30, 3, 4060, "milp", "--", "--", 1]


def test_gen_then_design(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    assert main(["gen", "--n", "8", "--k", "2", "--d", "3", "--seed", "2",
                 "--out", str(inst)]) == 0
    assert "S*=" in capsys.readouterr().out
    out = tmp_path / "fw"
    assert main(["design", "--instance", str(inst), "--backend", "lifted",
                 "--out", str(out), "--deterministic"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "backend,iters,g_cert,eps_lift,seconds"
    rep = json.loads((out / "fw_report.json").read_text())
    assert rep["schema"] == 1 and rep["status"] == "certified" and rep["seconds"] == 0.0


def test_design_rejects_bad_milp_epsilon(tmp_path):
    with pytest.raises(SystemExit):
        main(["design", "--n", "8", "--backend", "milp", "--epsilon", "0.1",
              "--eps-lmo", "0.6", "--out", str(tmp_path)])


def test_bsi_deterministic_outputs(tmp_path, capsys):
    args = ["bsi", "--n", "10", "--k", "2", "--d", "3", "--seed", "1", "--gap-margin", "0.05",
            "--seeds", "0-1", "--check-every", "500", "--deterministic"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("aggregate.csv", "trace_seed0.csv", "summary_seed1.json"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)
    with open(tmp_path / "a" / "aggregate.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["correct_frac"]) == 1.0
    assert "seed=0" in capsys.readouterr().out


def test_bench_lmo_small(tmp_path):
    assert main(["bench-lmo", "--n", "8", "--k", "2", "--d", "3", "--seeds", "0-1",
                 "--backend", "brute", "lifted", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "bench_lmo.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["backend"] for r in rows] == ["brute", "lifted"]
    assert all(r["combinations"] == "28" and r["runs"] == "2" for r in rows)


def test_check_subcommand(tmp_path, capsys):
    man = tmp_path / "m.json"
    assert main(["check", "--only", "schur_identity", "choice_probs_by_hand",
                 "--out", str(man)]) == 0
    data = json.loads(man.read_text())
    assert "2/2 checks passed" in capsys.readouterr().out
    assert isinstance(data, (dict, list))
    assert main(["check", "--list"]) == 0
    assert "milp.milp_exactness" in capsys.readouterr().out
    assert main(["check", "--corrupt-bigm", "0"]) == 1
