"""Command-line driver tests: every subcommand, exit codes, config handling.

The slow end-to-end paths (serve under SIGTERM, bench serve) run the real
entry point as a subprocess; everything else goes through CliRunner.
"""

import gzip
import signal
import socket
import subprocess
import sys
import time
from datetime import date
from pathlib import Path

import httpx
import pytest
from click.testing import CliRunner

from atmoscope.bench import MATCH_CSV_HEADER, SERVE_CSV_HEADER
from atmoscope.cli import cli
from atmoscope.core import window_for_days
from atmoscope.ingest import OrbitModel, generate_synthetic, write_jsonl
from atmoscope.matcher import MatchParams, match_indexed, pairs_to_wire
from atmoscope.recordio import canonical_dumps
from atmoscope.store import MANIFEST_NAME, Mode, open_catalog

DAY1 = date(2002, 7, 15)
DAY2 = date(2002, 7, 16)


def invoke(args, env=None):
    # catch_exceptions=False so an unexpected traceback fails loudly instead
    # of masquerading as exit code 1.
    return CliRunner().invoke(cli, args, env=env, catch_exceptions=False)


def gen_args(catalog, experiment, seed, interval=600.0):
    return ["gen", "--catalog", str(catalog), "--experiment", experiment,
            "--from", DAY1.isoformat(), "--to", DAY2.isoformat(),
            "--seed", str(seed), "--interval", str(interval)]


@pytest.fixture(scope="module")
def cli_catalog(tmp_path_factory):
    """Two small experiments published directly through the library."""
    root = tmp_path_factory.mktemp("cli-catalog")
    with open_catalog(root, Mode.READ_WRITE) as cat:
        for experiment, seed, interval in (("mipas", 3, 600.0), ("gome", 4, 700.0)):
            model = OrbitModel(seed=seed, scan_interval_s=interval)
            for day, recs in generate_synthetic(model, experiment, DAY1, DAY2).items():
                cat.publish_segment(experiment, day, recs)
    return root


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestGen:
    def test_publishes_and_reports_counts(self, tmp_path):
        result = invoke(gen_args(tmp_path / "cat", "mipas", 7))
        assert result.exit_code == 0, result.output
        expected = generate_synthetic(OrbitModel(seed=7, scan_interval_s=600.0),
                                      "mipas", DAY1, DAY2)
        lines = result.stdout.splitlines()
        assert lines[0] == f"2002-07-15  {len(expected[DAY1])}"
        assert lines[1] == f"2002-07-16  {len(expected[DAY2])}"
        total = len(expected[DAY1]) + len(expected[DAY2])
        assert lines[2] == f"total: {total} records in 2 day(s)"
        with open_catalog(tmp_path / "cat", Mode.READ_ONLY) as cat:
            got = list(cat.query("mipas", window_for_days(DAY1, DAY2)))
        assert got == expected[DAY1] + expected[DAY2]

    def test_two_runs_produce_identical_bytes(self, tmp_path):
        for sub in ("a", "b"):
            assert invoke(gen_args(tmp_path / sub, "mipas", 11)).exit_code == 0
        read = lambda sub, name: (tmp_path / sub / name).read_bytes()
        assert read("a", MANIFEST_NAME) == read("b", MANIFEST_NAME)
        rel = "segments/mipas/2002-07-15.seg"
        assert read("a", rel) == read("b", rel)

    def test_existing_day_conflicts_without_replace(self, tmp_path):
        args = gen_args(tmp_path / "cat", "mipas", 7)
        assert invoke(args).exit_code == 0
        second = invoke(args)
        assert second.exit_code == 2
        assert "error:" in second.stderr
        assert invoke(args + ["--replace"]).exit_code == 0

    def test_bad_day_is_usage_error(self, tmp_path):
        result = invoke(["gen", "--catalog", str(tmp_path), "--experiment", "mipas",
                         "--from", "2002-13-01", "--to", "2002-07-16", "--seed", "0"])
        assert result.exit_code == 2

    def test_reversed_range_is_usage_error(self, tmp_path):
        result = invoke(["gen", "--catalog", str(tmp_path), "--experiment", "mipas",
                         "--from", "2002-07-16", "--to", "2002-07-15", "--seed", "0"])
        assert result.exit_code == 2
        assert "out of order" in result.stderr


class TestIngest:
    @pytest.fixture()
    def day_records(self):
        model = OrbitModel(seed=5, scan_interval_s=600.0)
        return generate_synthetic(model, "mipas", DAY1, DAY2)

    def ingest_jsonl(self, tmp_path, day_records, suffix=""):
        path = tmp_path / f"records.jsonl{suffix}"
        write_jsonl(day_records[DAY1] + day_records[DAY2], str(path))
        return invoke(["ingest", "--catalog", str(tmp_path / "cat"),
                       "--experiment", "mipas", "--jsonl", str(path)])

    def test_jsonl_round_trip(self, tmp_path, day_records):
        result = self.ingest_jsonl(tmp_path, day_records)
        assert result.exit_code == 0, result.output
        assert f"total: {sum(map(len, day_records.values()))} records" in result.stdout
        with open_catalog(tmp_path / "cat", Mode.READ_ONLY) as cat:
            got = list(cat.query("mipas", window_for_days(DAY1, DAY2)))
        assert got == day_records[DAY1] + day_records[DAY2]

    def test_gzipped_jsonl(self, tmp_path, day_records):
        result = self.ingest_jsonl(tmp_path, day_records, suffix=".gz")
        assert result.exit_code == 0, result.output
        raw = (tmp_path / "records.jsonl.gz").read_bytes()
        assert raw[:2] == b"\x1f\x8b"  # really compressed, not just renamed
        with open_catalog(tmp_path / "cat", Mode.READ_ONLY) as cat:
            assert sum(n for _, n in cat.list_days("mipas")) == \
                sum(map(len, day_records.values()))

    def test_second_ingest_conflicts(self, tmp_path, day_records):
        assert self.ingest_jsonl(tmp_path, day_records).exit_code == 0
        path = tmp_path / "records.jsonl"
        again = invoke(["ingest", "--catalog", str(tmp_path / "cat"),
                        "--experiment", "mipas", "--jsonl", str(path)])
        assert again.exit_code == 2
        replaced = invoke(["ingest", "--catalog", str(tmp_path / "cat"),
                           "--experiment", "mipas", "--jsonl", str(path), "--replace"])
        assert replaced.exit_code == 0

    def test_empty_file_is_a_no_op(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        result = invoke(["ingest", "--catalog", str(tmp_path / "cat"),
                         "--experiment", "mipas", "--jsonl", str(path)])
        assert result.exit_code == 0
        assert result.stdout == "0 records\n"
        assert not (tmp_path / "cat" / MANIFEST_NAME).exists()

    def test_delimited_with_schema(self, tmp_path):
        path = tmp_path / "obs.txt"
        path.write_text("# comment\n"
                        "2002-07-15T00:01:05Z;10.5;-20.25;1234;2.1\n"
                        "2002-07-15T00:02:05Z;11.0;-20.5;1234;1.9\n")
        result = invoke(["ingest", "--catalog", str(tmp_path / "cat"),
                         "--experiment", "gome", "--delimited", str(path),
                         "--schema", "ci"])
        assert result.exit_code == 0, result.output
        with open_catalog(tmp_path / "cat", Mode.READ_ONLY) as cat:
            got = list(cat.query("gome", window_for_days(DAY1, DAY1)))
        assert [(r.record_id, r.lat, r.observables["ci"]) for r in got] == \
            [(0, 10.5, 2.1), (1, 11.0, 1.9)]

    def test_delimited_requires_schema(self, tmp_path):
        path = tmp_path / "obs.txt"
        path.write_text("2002-07-15T00:01:05Z;10.5;-20.25;1234;2.1\n")
        result = invoke(["ingest", "--catalog", str(tmp_path / "cat"),
                         "--experiment", "gome", "--delimited", str(path)])
        assert result.exit_code == 2
        assert "--schema" in result.stderr

    def test_exactly_one_source_required(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text("")
        base = ["ingest", "--catalog", str(tmp_path / "cat"), "--experiment", "mipas"]
        assert invoke(base).exit_code == 2
        both = base + ["--jsonl", str(path), "--delimited", str(path)]
        assert invoke(both).exit_code == 2

    def test_parse_error_exits_1_with_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"experiment":"mipas"}\nnot json\n')
        result = invoke(["ingest", "--catalog", str(tmp_path / "cat"),
                         "--experiment", "mipas", "--jsonl", str(path)])
        assert result.exit_code == 1
        assert "line 1" in result.stderr

    def test_bad_experiment_is_usage_error(self, tmp_path):
        path = tmp_path / "obs.txt"
        path.write_text("2002-07-15T00:01:05Z;10.5;-20.25;1234;2.1\n")
        result = invoke(["ingest", "--catalog", str(tmp_path / "cat"),
                         "--experiment", "MIPAS", "--delimited", str(path),
                         "--schema", "ci"])
        assert result.exit_code == 2


class TestMatch:
    # Tolerances wide enough that every A record pairs with some B record,
    # so the equality checks compare real structure rather than all nulls.
    DT, DIST = 200000.0, 20100.0

    def match_args(self, cli_catalog, **overrides):
        args = {"dt": str(self.DT), "dist": str(self.DIST), "threads": "4"}
        args.update({k: str(v) for k, v in overrides.items()})
        return ["match", "--catalog", str(cli_catalog),
                "--exp-a", "mipas", "--exp-b", "gome",
                "--from", DAY1.isoformat(), "--to", DAY2.isoformat(),
                "--dt", args["dt"], "--dist", args["dist"],
                "--threads", args["threads"]]

    def expected_wire(self, cli_catalog):
        window = window_for_days(DAY1, DAY2)
        with open_catalog(cli_catalog, Mode.READ_ONLY) as cat:
            side_a = list(cat.query("mipas", window))
            side_b = list(cat.query("gome", window))
        pairs = match_indexed(side_a, side_b,
                              MatchParams(dt_max_s=self.DT, dist_max_km=self.DIST),
                              threads=4)
        assert None not in pairs
        return canonical_dumps(pairs_to_wire(pairs)) + "\n"

    def test_matches_library_output(self, cli_catalog):
        result = invoke(self.match_args(cli_catalog))
        assert result.exit_code == 0, result.output
        assert result.stdout == self.expected_wire(cli_catalog)
        assert '"a_id":' in result.stdout

    def test_bruteforce_flag_gives_same_answer(self, cli_catalog):
        indexed = invoke(self.match_args(cli_catalog))
        brute = invoke(self.match_args(cli_catalog) + ["--bruteforce"])
        assert brute.exit_code == 0
        assert brute.stdout == indexed.stdout

    def test_thread_count_does_not_change_output(self, cli_catalog):
        one = invoke(self.match_args(cli_catalog, threads=1))
        eight = invoke(self.match_args(cli_catalog, threads=8))
        assert one.exit_code == eight.exit_code == 0
        assert one.stdout == eight.stdout

    def test_empty_window_prints_empty_array(self, cli_catalog):
        result = invoke(["match", "--catalog", str(cli_catalog),
                         "--exp-a", "mipas", "--exp-b", "gome",
                         "--from", "2003-01-01", "--to", "2003-01-02"])
        assert result.exit_code == 0
        assert result.stdout == "[]\n"

    def test_bad_tolerance_is_usage_error(self, cli_catalog):
        result = invoke(self.match_args(cli_catalog, dt="-5"))
        assert result.exit_code == 2

    def test_missing_catalog_is_runtime_error(self, tmp_path):
        result = invoke(["match", "--catalog", str(tmp_path / "nope"),
                         "--exp-a", "a", "--exp-b", "b",
                         "--from", "2002-07-15", "--to", "2002-07-15"])
        assert result.exit_code == 1
        assert "catalog root" in result.stderr


class TestWorkerCommand:
    def test_needs_catalog_and_frontend(self):
        result = invoke(["worker"])
        assert result.exit_code == 2
        assert "--catalog" in result.stderr and "--frontend" in result.stderr

    def test_unparseable_address(self, cli_catalog):
        result = invoke(["worker", "--catalog", str(cli_catalog),
                         "--frontend", "not-an-address"])
        assert result.exit_code == 2

    def test_read_write_mode_refused(self, cli_catalog):
        result = invoke(["worker", "--catalog", str(cli_catalog),
                         "--frontend", "127.0.0.1:9", "--catalog-mode", "read_write"])
        assert result.exit_code == 2
        assert "read-only" in result.stderr

    def test_flag_overrides_config_mode(self, cli_catalog, tmp_path):
        cfg = tmp_path / "worker.conf"
        cfg.write_text(f"catalog = {cli_catalog}\n"
                       "frontend = 127.0.0.1:9\n"
                       "catalog_mode = read_only\n")
        result = invoke(["worker", "--config", str(cfg),
                         "--catalog-mode", "read_write"])
        assert result.exit_code == 2

    def test_config_mode_refused_without_flags(self, cli_catalog, tmp_path):
        cfg = tmp_path / "worker.conf"
        cfg.write_text(f"catalog = {cli_catalog}\n"
                       "frontend = 127.0.0.1:9\n"
                       "catalog_mode = read_write\n")
        result = invoke(["worker", "--config", str(cfg)])
        assert result.exit_code == 2
        assert "read-only" in result.stderr

    def test_unreachable_frontend_exits_1(self, cli_catalog):
        port = free_port()  # nothing listens here any more
        result = invoke(["worker", "--catalog", str(cli_catalog),
                         "--frontend", f"127.0.0.1:{port}"])
        assert result.exit_code == 1
        assert "attempts" in result.stderr


class TestServeConfig:
    def test_config_required(self):
        result = invoke(["serve"], env={"ATMOSCOPE_CONFIG": None})
        assert result.exit_code == 2

    def test_env_var_supplies_config(self, tmp_path):
        cfg = tmp_path / "serve.conf"
        cfg.write_text("listen = 127.0.0.1:0\n")  # catalog key missing
        result = invoke(["serve"], env={"ATMOSCOPE_CONFIG": str(cfg)})
        assert result.exit_code == 2
        assert "missing required key 'catalog'" in result.stderr

    def test_missing_config_file(self):
        result = invoke(["serve", "--config", "/no/such/file.conf"])
        assert result.exit_code == 2

    def test_bad_static_dir(self, cli_catalog, tmp_path):
        cfg = tmp_path / "serve.conf"
        cfg.write_text(f"catalog = {cli_catalog}\n"
                       "static_dir = /no/such/dir\n")
        result = invoke(["serve", "--config", str(cfg)])
        assert result.exit_code == 2
        assert "static_dir" in result.stderr

    def test_malformed_config_line(self, tmp_path):
        cfg = tmp_path / "serve.conf"
        cfg.write_text("catalog\n")
        result = invoke(["serve", "--config", str(cfg)])
        assert result.exit_code == 2
        assert "key = value" in result.stderr

    def test_missing_catalog_is_runtime_error(self, tmp_path):
        cfg = tmp_path / "serve.conf"
        cfg.write_text("catalog = /no/such/catalog\n")
        result = invoke(["serve", "--config", str(cfg)])
        assert result.exit_code == 1


class TestServeProcess:
    def test_sigterm_shuts_down_cleanly(self, cli_catalog, tmp_path):
        port = free_port()
        cfg = tmp_path / "serve.conf"
        cfg.write_text(f"catalog = {cli_catalog}\n"
                       f"listen = 127.0.0.1:{port}\n"
                       "cluster_listen = 127.0.0.1:0\n"
                       "workers = 0\n")
        proc = subprocess.Popen(
            [sys.executable, "-m", "atmoscope.cli", "serve", "--config", str(cfg)],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        try:
            deadline = time.monotonic() + 30.0
            url = f"http://127.0.0.1:{port}/api/v1/experiments"
            while True:
                assert proc.poll() is None, proc.communicate()[1].decode()
                try:
                    if httpx.get(url, timeout=2.0).status_code == 200:
                        break
                except httpx.HTTPError:
                    pass
                assert time.monotonic() < deadline, "server never came up"
                time.sleep(0.1)
            proc.send_signal(signal.SIGTERM)
            _, stderr = proc.communicate(timeout=20.0)
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait()
        assert proc.returncode == 0
        text = stderr.decode()
        assert "serving http://127.0.0.1" in text
        assert "shutdown complete" in text


class TestBenchCommands:
    def test_match_bench_csv(self):
        result = invoke(["bench", "match", "--size", "300", "--threads", "2"])
        assert result.exit_code == 0, result.output
        lines = result.stdout.splitlines()
        assert lines[0] == MATCH_CSV_HEADER
        size, threads, brute_ms, fast_ms, speedup, equal = lines[1].split(",")
        assert (size, threads, equal) == ("300", "2", "true")
        assert float(brute_ms) > 0 and float(fast_ms) > 0 and float(speedup) > 0
        assert len(lines) == 2

    def test_match_bench_bad_size(self):
        assert invoke(["bench", "match", "--size", "0"]).exit_code == 2

    def test_serve_bench_csv(self, tmp_path):
        result = invoke(["bench", "serve", "--days", "2", "--workers", "1",
                         "--repeat", "1", "--catalog", str(tmp_path / "bench")])
        assert result.exit_code == 0, result.output
        lines = result.stdout.splitlines()
        assert lines[0] == SERVE_CSV_HEADER
        assert len(lines) == 3
        for i, line in enumerate(lines[1:], start=1):
            day_index, n_points, elapsed_ms, us_per_point, workers = line.split(",")
            assert int(day_index) == i
            assert int(n_points) > 0
            assert float(elapsed_ms) > 0 and float(us_per_point) > 0
            assert workers == "1"
        assert "median_makespan_ms=" in result.stderr

    def test_serve_bench_bad_args(self):
        assert invoke(["bench", "serve", "--days", "0"]).exit_code == 2


def test_help_lists_subcommands():
    result = invoke(["--help"])
    assert result.exit_code == 0
    for name in ("ingest", "gen", "serve", "worker", "match", "bench"):
        assert name in result.stdout
