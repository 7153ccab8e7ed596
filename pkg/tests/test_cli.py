"""CLI contracts: exit codes, schemas, determinism, atomic output."""

import io
import json
import os

import pytest

from satlab.cli import main
from satlab.formula import parse_dimacs, verify_assignment
from satlab.ode import CSV_HEADER


def run_cli(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


class TestGen:
    def test_header_and_roundtrip(self, tmp_path):
        path = tmp_path / "f.cnf"
        code, _ = run_cli("gen", "--n", "50", "--density", "3.52",
                          "--seed", "1", "--out", str(path))
        assert code == 0
        text = path.read_text()
        assert text.splitlines()[0] == "p cnf 50 176"
        f = parse_dimacs(text)
        assert f.n == 50 and len(f.original) == 176

    def test_byte_identical_reruns(self, tmp_path):
        p1, p2 = tmp_path / "a.cnf", tmp_path / "b.cnf"
        run_cli("gen", "--n", "40", "--density", "4.0", "--seed", "9",
                "--out", str(p1))
        run_cli("gen", "--n", "40", "--density", "4.0", "--seed", "9",
                "--out", str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_small_n_is_usage_error(self):
        code, _ = run_cli("gen", "--n", "2", "--density", "1.0")
        assert code == 1

    def test_no_partial_file_on_error(self, tmp_path):
        target = tmp_path / "missing-dir" / "f.cnf"
        code, _ = run_cli("gen", "--n", "10", "--density", "2.0",
                          "--out", str(target))
        assert code == 1
        assert not target.exists()


class TestSolve:
    def test_satisfiable_greedy(self, tmp_path):
        path = tmp_path / "f.cnf"
        path.write_text("p cnf 3 1\n1 2 3 0\n")
        code, out = run_cli("solve", str(path))
        assert code == 10
        record = json.loads(out)
        assert record["status"] == "success"
        assignment = {abs(l): l > 0 for l in record["assignment"]}
        assert verify_assignment(parse_dimacs(path.read_text()), assignment)

    def test_contradiction_modes(self, tmp_path):
        path = tmp_path / "f.cnf"
        path.write_text("p cnf 1 2\n1 0\n-1 0\n")
        assert run_cli("solve", str(path), "--mode", "dpll")[0] == 20
        assert run_cli("solve", str(path), "--mode", "greedy")[0] == 30
        assert run_cli("solve", str(path), "--mode", "greedy+backtrack")[0] == 30

    def test_parse_error_exit(self, tmp_path):
        path = tmp_path / "f.cnf"
        path.write_text("p cnf 1 1\n1 1 0\n")
        code, _ = run_cli("solve", str(path))
        assert code == 1

    def test_missing_file(self):
        code, _ = run_cli("solve", "/nonexistent/f.cnf")
        assert code == 1

    def test_record_schema(self, tmp_path):
        path = tmp_path / "f.cnf"
        path.write_text("p cnf 2 1\n1 -2 0\n")
        _, out = run_cli("solve", str(path), "--rule", "maxmax",
                         "--polarity", "paper", "--seed", "7")
        record = json.loads(out)
        for key in ("status", "n", "m", "density", "rule", "polarity",
                    "backtracking", "free_moves", "forced_moves", "seed"):
            assert key in record, key
        assert record["rule"] == "maxmax"
        assert record["polarity"] == "paper"


class TestMcSweep:
    def test_deterministic_csv(self, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            code, _ = run_cli(
                "mc-sweep", "--density", "2.0,4.2", "--n", "120",
                "--trials", "4", "--seed", "3", "--threads", "1",
                "--out", str(p),
            )
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
        header = paths[0].read_text().splitlines()[0]
        assert header == "c,n,trials,successes,success_rate,mean_free_moves,mean_forced_moves"

    def test_zero_trials_usage_error(self):
        code, _ = run_cli("mc-sweep", "--density", "3.0", "--n", "100",
                          "--trials", "0")
        assert code == 1


class TestOdeRun:
    def test_subcritical_schema_and_exit(self, tmp_path):
        path = tmp_path / "traj.csv"
        code, _ = run_cli("ode-run", "--density", "3.0", "--delta", "1e-4",
                          "--out", str(path))
        assert code == 0
        lines = path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) > 2

    def test_supercritical_exit(self, tmp_path):
        code, _ = run_cli("ode-run", "--density", "4.2", "--delta", "1e-4",
                          "--out", str(tmp_path / "t.csv"))
        assert code == 30

    def test_snapshots_json(self, tmp_path):
        snap = tmp_path / "snap.json"
        run_cli("ode-run", "--density", "3.0", "--delta", "1e-4",
                "--snapshot-t", "0.1", "--snapshots-out", str(snap),
                "--out", str(tmp_path / "t.csv"))
        data = json.loads(snap.read_text())
        assert len(data) == 1
        assert len(data[0]["grid"]) == 32


class TestThreshold:
    def test_coarse_bisection_json(self, tmp_path):
        path = tmp_path / "th.json"
        code, _ = run_cli(
            "threshold", "--lo", "3.0", "--hi", "4.0", "--tol", "0.2",
            "--delta", "1e-4", "--probe-delta", "1e-4", "--out", str(path),
        )
        assert code == 0
        d = json.loads(path.read_text())
        assert 3.0 <= d["bracket_lo"] < d["bracket_hi"] <= 4.0
        assert d["confirmed"] is True

    def test_bad_bracket_exit(self, tmp_path):
        code, _ = run_cli(
            "threshold", "--lo", "4.2", "--hi", "4.6", "--tol", "0.2",
            "--delta", "1e-4", "--probe-delta", "1e-4",
            "--out", str(tmp_path / "x.json"),
        )
        assert code == 1
        assert not (tmp_path / "x.json").exists()


class TestXvalCommand:
    def test_report_schema(self, tmp_path):
        path = tmp_path / "xval.json"
        code, _ = run_cli(
            "xval", "--density", "3.0", "--n", "20000", "--trials", "1",
            "--checkpoints", "0.1", "--delta", "1e-4", "--threads", "1",
            "--seed", "2", "--out", str(path),
        )
        assert code == 0
        d = json.loads(path.read_text())
        assert d["checkpoints"][0]["t"] == 0.1
        assert d["checkpoints"][0]["mean_linf"] is not None

    def test_checkpoint_beyond_end_is_error(self, tmp_path):
        code, _ = run_cli(
            "xval", "--density", "4.2", "--n", "2000", "--trials", "1",
            "--checkpoints", "0.9", "--delta", "1e-4", "--threads", "1",
            "--out", str(tmp_path / "x.json"),
        )
        assert code == 1
