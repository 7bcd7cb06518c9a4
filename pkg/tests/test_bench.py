"""Benchmark harness tests: corpus seeding, CSV output, matcher comparison.

The timing numbers themselves are machine-dependent and asserted only for
sign; what matters is determinism of the inputs and exactness of the
report format, since downstream tooling parses the CSV.
"""

import io
from datetime import date

import pytest

from atmoscope.bench import (
    MATCH_CSV_HEADER,
    SERVE_CSV_HEADER,
    MatchBenchRow,
    ServeBenchResult,
    ServeBenchRow,
    ServerStack,
    measure_serve,
    run_match_bench,
    seed_corpus,
    serve_summary,
    synth_match_side,
    write_match_csv,
    write_serve_csv,
)
from atmoscope.core import MS_PER_DAY, day_start_ms
from atmoscope.store import MANIFEST_NAME, Mode, open_catalog


class TestSeedCorpus:
    def test_publishes_requested_days(self, tmp_path):
        days = seed_corpus(tmp_path, "mipas", n_days=3, seed=0, interval_s=600.0)
        assert [d.isoformat() for d in days] == \
            ["2002-07-01", "2002-07-02", "2002-07-03"]
        with open_catalog(tmp_path, Mode.READ_ONLY) as cat:
            published = dict(cat.list_days("mipas"))
        assert set(published) == set(days)
        assert all(n > 0 for n in published.values())

    def test_second_call_is_a_no_op(self, tmp_path):
        seed_corpus(tmp_path, "mipas", n_days=3, seed=0, interval_s=600.0)
        before = (tmp_path / MANIFEST_NAME).read_bytes()
        days = seed_corpus(tmp_path, "mipas", n_days=3, seed=0, interval_s=600.0)
        assert len(days) == 3
        assert (tmp_path / MANIFEST_NAME).read_bytes() == before

    def test_fills_only_missing_days(self, tmp_path):
        first = seed_corpus(tmp_path, "mipas", n_days=1, seed=0, interval_s=600.0)
        extended = seed_corpus(tmp_path, "mipas", n_days=3, seed=0, interval_s=600.0)
        assert extended[0] == first[0]
        with open_catalog(tmp_path, Mode.READ_ONLY) as cat:
            assert len(cat.list_days("mipas")) == 3


class TestSynthSide:
    def test_deterministic_in_seed(self):
        assert synth_match_side("a", 50, seed=9) == synth_match_side("a", 50, seed=9)
        assert synth_match_side("a", 50, seed=9) != synth_match_side("a", 50, seed=10)

    def test_shape_and_bounds(self):
        day = date(2002, 7, 15)
        recs = synth_match_side("a", 200, seed=1, day=day)
        assert len(recs) == 200
        assert [r.record_id for r in recs] == list(range(200))
        start = day_start_ms(day)
        times = [r.time_ms for r in recs]
        assert times == sorted(times)
        assert all(start <= t < start + MS_PER_DAY for t in times)
        assert all(-82.0 <= r.lat <= 82.0 for r in recs)
        assert all(-180.0 <= r.lon < 180.0 for r in recs)


class TestCsvFormat:
    def test_serve_csv_exact(self):
        rows = [
            ServeBenchRow(day_index=1, day=date(2002, 7, 1), n_points=1329,
                          elapsed_ms=46.5789, us_per_point=35.0481, workers=2),
            ServeBenchRow(day_index=2, day=date(2002, 7, 2), n_points=900,
                          elapsed_ms=30.0, us_per_point=33.3333, workers=2),
        ]
        result = ServeBenchResult(rows, workers=2, repeats=3,
                                  makespans_ms=[100.0, 90.0, 95.0])
        out = io.StringIO()
        write_serve_csv(result, out)
        assert out.getvalue() == (
            "day_index,n_points,elapsed_ms,us_per_point,workers\n"
            "1,1329,46.579,35.048,2\n"
            "2,900,30.000,33.333,2\n")
        assert result.median_makespan_ms == 95.0
        assert result.total_points == 2229
        assert result.median_us_per_point == pytest.approx(34.1907)

    def test_match_csv_exact(self):
        rows = [MatchBenchRow(size=2000, threads=4, bruteforce_ms=1234.5678,
                              indexed_ms=98.7654, speedup=12.5, equal=True),
                MatchBenchRow(size=1, threads=1, bruteforce_ms=1.0,
                              indexed_ms=1.0, speedup=1.0, equal=False)]
        out = io.StringIO()
        write_match_csv(rows, out)
        lines = out.getvalue().splitlines()
        assert lines[0] == MATCH_CSV_HEADER
        assert lines[1] == "2000,4,1234.568,98.765,12.500,true"
        assert lines[2] == "1,1,1.000,1.000,1.000,false"

    def test_headers_are_frozen(self):
        # downstream plotting keys on these column names
        assert SERVE_CSV_HEADER == "day_index,n_points,elapsed_ms,us_per_point,workers"
        assert MATCH_CSV_HEADER == "size,threads,bruteforce_ms,indexed_ms,speedup,equal"

    def test_summary_fields(self):
        result = ServeBenchResult([], workers=3, repeats=2, makespans_ms=[10.0])
        text = serve_summary(result)
        for token in ("workers=3", "days=0", "repeats=2",
                      "median_makespan_ms=10.0", "total_points=0"):
            assert token in text


class TestRunMatchBench:
    def test_small_run_agrees(self):
        row = run_match_bench(200, threads=2, seed=5)
        assert (row.size, row.threads) == (200, 2)
        assert row.equal is True
        assert row.bruteforce_ms > 0 and row.indexed_ms > 0 and row.speedup > 0


class TestMeasureServe:
    def test_empty_day_list(self):
        result = measure_serve("http://127.0.0.1:1", "mipas", [], workers=1)
        assert result.rows == [] and result.makespans_ms == [0.0]

    def test_against_live_stack(self, tmp_path):
        days = seed_corpus(tmp_path, "mipas", n_days=2, seed=0, interval_s=130.0)
        with open_catalog(tmp_path, Mode.READ_ONLY) as cat:
            counts = dict(cat.list_days("mipas"))
        with ServerStack(tmp_path, workers=1) as stack:
            result = measure_serve(stack.base_url, "mipas", days,
                                   workers=1, repeats=2)
        assert [r.day_index for r in result.rows] == [1, 2]
        assert [r.n_points for r in result.rows] == [counts[d] for d in days]
        assert all(r.elapsed_ms > 0 and r.us_per_point > 0 for r in result.rows)
        assert all(r.workers == 1 for r in result.rows)
        assert len(result.makespans_ms) == 2
        assert result.median_makespan_ms > 0
