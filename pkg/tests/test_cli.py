import csv
import json
from pathlib import Path

import numpy as np
import pytest

from blockmads.cli import build_parser, fmt, main, run_id


class TestFormatting:
    def test_inf_and_nan(self):
        assert fmt(float("inf")) == "inf"
        assert fmt(float("-inf")) == "-inf"
        assert fmt(float("nan")) == "nan"
        assert float(fmt(float("inf"))) == float("inf")

    def test_seventeen_digit_round_trip(self):
        vals = [0.1, 1.0 / 3.0, 5885.332, 2.3809593194271708, 1e-13]
        for v in vals:
            assert float(fmt(v)) == v

    def test_run_id(self):
        assert run_id("welded", "lowess-b", 8, 3) == "welded_lowess-b_q8_r3"


class TestParser:
    def test_unknown_problem_rejected(self):
        parser = build_parser()
        with pytest.raises(SystemExit):
            parser.parse_args(["run", "--problem", "solar1", "--solver", "mads"])

    def test_unknown_flag_rejected(self):
        parser = build_parser()
        with pytest.raises(SystemExit):
            parser.parse_args(["run", "--problem", "tcsd", "--solver", "mads",
                               "--bogus", "1"])

    def test_defaults(self):
        args = build_parser().parse_args(["bench"])
        assert args.q == [1, 8]
        assert args.runs == 10


class TestRunCommand:
    def test_run_writes_trace_and_report(self, tmp_path):
        code = main(["run", "--problem", "tcsd", "--solver", "lhsearch",
                     "--q", "4", "--blocks", "6", "--seed", "1",
                     "--out-dir", str(tmp_path)])
        assert code == 0
        trace = tmp_path / "trace_tcsd_lhsearch_q4_r0.csv"
        report = tmp_path / "search_report_tcsd_lhsearch_q4_r0.jsonl"
        assert trace.exists() and report.exists()
        with open(trace, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) <= 6
        assert set(rows[0]) == {"iteration", "phase", "block_index", "q",
                                "best_f", "best_h", "delta_mesh", "delta_poll"}
        for line in report.read_text().splitlines():
            json.loads(line)

    def test_run_deterministic_trace_bytes_across_threads(self, tmp_path):
        blobs = {}
        for threads, sub in (("1", "a"), ("8", "b")):
            out = tmp_path / sub
            main(["run", "--problem", "tcsd", "--solver", "mads", "--q", "4",
                  "--blocks", "8", "--seed", "5", "--threads", threads,
                  "--out-dir", str(out)])
            blobs[threads] = (out / "trace_tcsd_mads_q4_r0.csv").read_bytes()
        assert blobs["1"] == blobs["8"]


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    code = main(["bench", "--problems", "tcsd", "--solvers", "mads,lhsearch",
                 "--q", "1,2", "--runs", "2", "--blocks", "8", "--seed", "3",
                 "--threads", "1", "--out-dir", str(out)])
    assert code == 0
    return out


class TestBenchAndProfiles:
    def test_bench_summary_and_traces(self, bench_dir):
        with open(bench_dir / "bench_summary.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 2 * 2  # solvers x q x runs
        for row in rows:
            rid = run_id(row["problem"], row["solver"], int(row["q"]), int(row["run"]))
            assert (bench_dir / f"trace_{rid}.csv").exists()

    def test_profiles_outputs(self, bench_dir):
        code = main(["profiles", "--tau", "0.5", "--out-dir", str(bench_dir)])
        assert code == 0
        prof = bench_dir / "profiles_tau0.5.csv"
        assert prof.exists()
        with open(prof, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["solver"] for r in rows} == {"mads", "lhsearch"}
        for r in rows:
            assert 0.0 <= float(r["proportion"]) <= 1.0
        assert (bench_dir / "scalability.csv").exists()
        assert (bench_dir / "distribution.csv").exists()
        with open(bench_dir / "scalability.csv", newline="") as fh:
            scal = list(csv.DictReader(fh))
        ones = [r for r in scal if r["q"] == "1" and r["pairs"] != "0"]
        for r in ones:
            assert float(r["speedup"]) == 1.0

    def test_profiles_replay_byte_identical(self, bench_dir):
        prof = bench_dir / "profiles_tau0.5.csv"
        main(["profiles", "--tau", "0.5", "--out-dir", str(bench_dir)])
        first = prof.read_bytes()
        scal1 = (bench_dir / "scalability.csv").read_bytes()
        main(["profiles", "--tau", "0.5", "--out-dir", str(bench_dir)])
        assert prof.read_bytes() == first
        assert (bench_dir / "scalability.csv").read_bytes() == scal1

    def test_profiles_without_bench_errors(self, tmp_path):
        assert main(["profiles", "--out-dir", str(tmp_path / "empty")]) == 2
