"""Command-line interface: subcommands, outputs and exit codes."""
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from tspcascade.cli import (CSV_HEADER, EXIT_CONFIG_ERROR, EXIT_DEGENERATE,
                            EXIT_PARSE_ERROR, main)
from tspcascade.core import parse_tsplib


@pytest.fixture()
def instance_file(tmp_path):
    rc = main(["gen", "--n", "40", "--count", "1", "--seed", "7",
               "--out", str(tmp_path)])
    assert rc == 0
    return tmp_path / "uniform40_0.tsp"


SOLVE_FAST = ["--iter-budget", "4000", "--pop", "6", "--nch", "4"]


class TestGen:
    def test_writes_parseable_instances(self, tmp_path):
        rc = main(["gen", "--n", "12", "--count", "3", "--out", str(tmp_path)])
        assert rc == 0
        files = sorted(tmp_path.glob("*.tsp"))
        assert len(files) == 3
        inst = parse_tsplib(files[0].read_text())
        assert inst.n == 12

    def test_rejects_tiny_n(self, tmp_path, capsys):
        assert main(["gen", "--n", "2", "--out", str(tmp_path)]) == \
            EXIT_CONFIG_ERROR

    def test_deterministic_for_seed(self, tmp_path):
        main(["gen", "--n", "10", "--seed", "3", "--out", str(tmp_path / "a")])
        main(["gen", "--n", "10", "--seed", "3", "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "uniform10_0.tsp").read_text()
        b = (tmp_path / "b" / "uniform10_0.tsp").read_text()
        assert a == b


class TestSolve:
    def test_solves_and_prints_json(self, instance_file, tmp_path, capsys):
        trace_out = tmp_path / "trace.jsonl"
        rc = main(["solve", str(instance_file), *SOLVE_FAST,
                   "--bks", "100000", "--trace-out", str(trace_out)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert out["n"] == 40
        assert out["length"] > 0
        assert "gap" in out
        assert trace_out.exists()
        first = json.loads(trace_out.read_text().splitlines()[0])
        assert set(first) == {"t", "len", "phase"}

    def test_missing_file_is_parse_error(self, tmp_path):
        assert main(["solve", str(tmp_path / "nope.tsp")]) == EXIT_PARSE_ERROR

    def test_garbage_file_is_parse_error(self, tmp_path):
        bad = tmp_path / "bad.tsp"
        bad.write_text("not a tsp file")
        assert main(["solve", str(bad)]) == EXIT_PARSE_ERROR

    def test_bad_transition_is_config_error(self, instance_file):
        rc = main(["solve", str(instance_file), "--t-max", "5",
                   "--t-trans", "9"])
        assert rc == EXIT_CONFIG_ERROR


class TestBench:
    def test_produces_csv_report_and_figures(self, instance_file, tmp_path,
                                             monkeypatch):
        monkeypatch.setenv("UNICS_THREADS", "1")
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps(
            [{"path": str(instance_file), "bks": 100000}]))
        out_dir = tmp_path / "bench"
        rc = main(["bench", str(manifest), *SOLVE_FAST, "--runs", "2",
                   "--out", str(out_dir), "--curves"])
        assert rc == 0

        with open(out_dir / "runs.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == CSV_HEADER
        assert len(rows) == 3  # header + 2 runs
        seeds = {int(r[CSV_HEADER.index("seed")]) for r in rows[1:]}
        assert seeds == {42, 102}  # 42 + 60 * run index

        report = json.loads((out_dir / "report.json").read_text())
        agg = report["instances"]["uniform40_0"]
        assert agg["runs"] == 2
        assert agg["best_length"] <= agg["avg_length"]
        assert "avg_gap" in agg and "avg_gap" in report["group"]
        assert (out_dir / "uniform40_0_convergence.png").exists()
        assert (out_dir / "uniform40_0_gap_curve.csv").exists()
        assert (out_dir / "gaps.png").exists()


class TestFitPolicy:
    def test_fits_and_writes_policy(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("UNICS_THREADS", "1")
        paths = []
        for n in (20, 40):
            main(["gen", "--n", str(n), "--seed", str(n), "--out",
                  str(tmp_path)])
            paths.append(tmp_path / f"uniform{n}_0.tsp")
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps([{"path": str(p)} for p in paths]))
        out = tmp_path / "policy.txt"
        rc = main(["fit-policy", str(manifest), "--t-max", "2",
                   "--grid", "0.2,0.8", "--pop", "4", "--nch", "2",
                   "--out", str(out)])
        assert rc == 0
        text = out.read_text()
        assert text.startswith("a=")

    def test_single_size_is_degenerate(self, instance_file, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps([{"path": str(instance_file)}]))
        rc = main(["fit-policy", str(manifest), "--t-max", "1",
                   "--grid", "0.1,0.3", "--pop", "4", "--nch", "2",
                   "--out", str(tmp_path / "p.txt")])
        assert rc == EXIT_DEGENERATE
