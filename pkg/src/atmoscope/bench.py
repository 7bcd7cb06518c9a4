"""Desk-scale benchmark harness for served latency and matcher speed.

Serving latency is measured end-to-end through the REST API and normalised
to microseconds per point, so runs against different corpora stay
comparable. Each repeat issues all day requests concurrently, one request
per day, and the repeat's wall time (makespan) captures how well the worker
pool parallelises. Repeats report the median, which is robust to scheduler
noise on a busy machine.

The server under test runs as a real subprocess (its own interpreter, its
own workers), so client-side measurement cost never shares a GIL with the
code being measured. Everything here is also importable so tests can
benchmark without scraping CSV from a subprocess.
"""

from __future__ import annotations

import re
import socket
import statistics
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Sequence, TextIO

import httpx
import numpy as np

from .core import MS_PER_DAY, ObservationRecord, day_start_ms
from .ingest import OrbitModel, generate_synthetic
from .matcher import MatchParams, MatchPair, match_bruteforce, match_indexed
from .store import Mode, open_catalog

SERVE_CSV_HEADER = "day_index,n_points,elapsed_ms,us_per_point,workers"
MATCH_CSV_HEADER = "size,threads,bruteforce_ms,indexed_ms,speedup,equal"

BENCH_FIRST_DAY = date(2002, 7, 1)
BENCH_EXPERIMENT = "mipas"

_COUNT_RE = re.compile(rb'"count":(\d+)')


def seed_corpus(root: str | Path, experiment: str = BENCH_EXPERIMENT,
                first: date = BENCH_FIRST_DAY, n_days: int = 20,
                seed: int = 0, interval_s: float = 65.0) -> list[date]:
    """Generate and publish a deterministic synthetic corpus; idempotent."""
    last = first + timedelta(days=n_days - 1)
    days = [first + timedelta(days=i) for i in range(n_days)]
    probe = open_catalog(root, Mode.READ_WRITE)
    try:
        have = {d for d, _ in probe.list_days(experiment)}
        if all(d in have for d in days):
            return days
        model = OrbitModel(seed=seed, scan_interval_s=interval_s)
        for day, records in generate_synthetic(model, experiment, first, last).items():
            if day not in have and records:
                probe.publish_segment(experiment, day, records)
    finally:
        probe.close()
    return days


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class ServerStack:
    """The full serving topology as a subprocess, for realistic measurement.

    Writes a config file, spawns ``atmoscope serve`` (which in turn spawns
    the requested worker processes), and waits until the cluster reports all
    workers READY. Use as a context manager; ``stop`` sends SIGTERM for the
    graceful path.
    """

    def __init__(self, catalog_root: str | Path, workers: int = 1,
                 heartbeat_interval_s: float = 2.0,
                 static_dir: Optional[str | Path] = None,
                 startup_timeout_s: float = 30.0):
        self.catalog_root = str(catalog_root)
        self.workers = workers
        self.heartbeat_interval_s = heartbeat_interval_s
        self.static_dir = static_dir
        self.startup_timeout_s = startup_timeout_s
        self.base_url = ""
        self.proc: Optional[subprocess.Popen] = None
        self._tmp: Optional[tempfile.TemporaryDirectory] = None

    def start(self) -> "ServerStack":
        port = _free_port()
        self._tmp = tempfile.TemporaryDirectory(prefix="atmoscope-serve-")
        lines = [
            f'catalog = "{self.catalog_root}"',
            f"listen = 127.0.0.1:{port}",
            "cluster_listen = 127.0.0.1:0",
            f"workers = {self.workers}",
            f"heartbeat_interval_s = {self.heartbeat_interval_s}",
        ]
        if self.static_dir is not None:
            lines.append(f'static_dir = "{self.static_dir}"')
        config_path = Path(self._tmp.name) / "serve.conf"
        config_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "atmoscope.cli", "serve",
             "--config", str(config_path)],
            stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        self.base_url = f"http://127.0.0.1:{port}"
        deadline = time.monotonic() + self.startup_timeout_s
        with httpx.Client(base_url=self.base_url, timeout=5.0) as client:
            while True:
                if self.proc.poll() is not None:
                    self.stop()
                    raise RuntimeError(
                        f"serve process exited with {self.proc.returncode} during startup")
                try:
                    resp = client.get("/api/v1/cluster/status")
                    if resp.status_code == 200:
                        ready = sum(1 for w in resp.json()["data"]
                                    if w["state"] in ("READY", "BUSY"))
                        if ready >= self.workers:
                            return self
                except httpx.HTTPError:
                    pass
                if time.monotonic() > deadline:
                    self.stop()
                    raise RuntimeError(
                        f"{self.workers} worker(s) did not become READY within "
                        f"{self.startup_timeout_s}s")
                time.sleep(0.05)

    def stop(self) -> None:
        if self.proc is not None:
            if self.proc.poll() is None:
                self.proc.terminate()
                try:
                    self.proc.wait(timeout=10.0)
                except subprocess.TimeoutExpired:
                    self.proc.kill()
                    self.proc.wait()
            self.proc = None
        if self._tmp is not None:
            self._tmp.cleanup()
            self._tmp = None

    def __enter__(self) -> "ServerStack":
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()


# --- serve benchmark ------------------------------------------------------

@dataclass(frozen=True)
class ServeBenchRow:
    day_index: int  # 1-based position in the benchmarked range
    day: date
    n_points: int
    elapsed_ms: float  # median across repeats
    us_per_point: float
    workers: int


@dataclass
class ServeBenchResult:
    rows: list[ServeBenchRow]
    workers: int
    repeats: int
    makespans_ms: list[float]

    @property
    def median_makespan_ms(self) -> float:
        return statistics.median(self.makespans_ms)

    @property
    def total_points(self) -> int:
        return sum(r.n_points for r in self.rows)

    @property
    def median_us_per_point(self) -> float:
        if not self.rows:
            return 0.0
        return statistics.median(r.us_per_point for r in self.rows)


def measure_serve(base_url: str, experiment: str, days: Sequence[date],
                  workers: int, repeats: int = 3,
                  timeout_s: float = 120.0) -> ServeBenchResult:
    """Fetch every day's records endpoint concurrently, ``repeats`` times.

    Per-day latency is the client-observed wall time of that day's request;
    the makespan is first-issue to last-arrival of one repeat. Days are
    requested cold each repeat (no client caching). The client deliberately
    never parses response bodies inside the measured region; the point count
    is read off the envelope tail with a regex to keep the client cheap.
    """
    n = len(days)
    if n == 0:
        return ServeBenchResult([], workers, repeats, [0.0])
    elapsed: list[list[float]] = [[] for _ in range(n)]
    counts = [0] * n
    makespans: list[float] = []
    with httpx.Client(base_url=base_url, timeout=timeout_s) as client:
        def fetch(i: int) -> None:
            t0 = time.perf_counter()
            resp = client.get(f"/api/v1/experiments/{experiment}/records",
                              params={"day": days[i].isoformat()})
            resp.raise_for_status()
            elapsed[i].append((time.perf_counter() - t0) * 1000.0)
            m = _COUNT_RE.search(resp.content[-256:])
            counts[i] = int(m.group(1)) if m else 0

        for _ in range(repeats):
            t0 = time.perf_counter()
            with ThreadPoolExecutor(max_workers=n) as pool:
                list(pool.map(fetch, range(n)))
            makespans.append((time.perf_counter() - t0) * 1000.0)
    rows = []
    for i, day in enumerate(days):
        med = statistics.median(elapsed[i])
        per_point = 1000.0 * med / counts[i] if counts[i] else 0.0
        rows.append(ServeBenchRow(day_index=i + 1, day=day, n_points=counts[i],
                                  elapsed_ms=med, us_per_point=per_point,
                                  workers=workers))
    return ServeBenchResult(rows, workers, repeats, makespans)


def write_serve_csv(result: ServeBenchResult, out: TextIO) -> None:
    out.write(SERVE_CSV_HEADER + "\n")
    for r in result.rows:
        out.write(f"{r.day_index},{r.n_points},{r.elapsed_ms:.3f},"
                  f"{r.us_per_point:.3f},{r.workers}\n")


def serve_summary(result: ServeBenchResult) -> str:
    return (f"workers={result.workers} days={len(result.rows)} "
            f"repeats={result.repeats} "
            f"median_makespan_ms={result.median_makespan_ms:.1f} "
            f"total_points={result.total_points} "
            f"median_us_per_point={result.median_us_per_point:.1f}")


# --- match benchmark ------------------------------------------------------

@dataclass(frozen=True)
class MatchBenchRow:
    size: int
    threads: int
    bruteforce_ms: float
    indexed_ms: float
    speedup: float
    equal: bool


def synth_match_side(experiment: str, n: int, seed: int,
                     day: date = date(2002, 7, 15)) -> list[ObservationRecord]:
    """n uniform random records over one UTC day; deterministic in seed."""
    rng = np.random.default_rng(seed)
    t0 = day_start_ms(day)
    times = np.sort(rng.integers(0, MS_PER_DAY, size=n))
    lats = rng.uniform(-82.0, 82.0, size=n)
    lons = rng.uniform(-180.0, 180.0, size=n)
    return [
        ObservationRecord(experiment=experiment, record_id=i,
                          time_ms=t0 + int(times[i]), lat=float(lats[i]),
                          lon=float(lons[i]), orbit=0)
        for i in range(n)
    ]


def run_match_bench(size: int, threads: int, seed: int = 0,
                    params: Optional[MatchParams] = None) -> MatchBenchRow:
    if params is None:
        params = MatchParams(dt_max_s=900.0, dist_max_km=300.0)
    side_a = synth_match_side("bench_a", size, seed)
    side_b = synth_match_side("bench_b", size, seed + 1)

    t0 = time.perf_counter()
    brute: list[Optional[MatchPair]] = match_bruteforce(side_a, side_b, params)
    brute_ms = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    fast = match_indexed(side_a, side_b, params, threads=threads)
    fast_ms = (time.perf_counter() - t0) * 1000.0

    speedup = brute_ms / fast_ms if fast_ms > 0 else float("inf")
    return MatchBenchRow(size=size, threads=threads, bruteforce_ms=brute_ms,
                         indexed_ms=fast_ms, speedup=speedup,
                         equal=brute == fast)


def write_match_csv(rows: Sequence[MatchBenchRow], out: TextIO) -> None:
    out.write(MATCH_CSV_HEADER + "\n")
    for r in rows:
        out.write(f"{r.size},{r.threads},{r.bruteforce_ms:.3f},"
                  f"{r.indexed_ms:.3f},{r.speedup:.3f},"
                  f"{str(r.equal).lower()}\n")
