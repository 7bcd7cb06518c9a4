"""Shared fixtures: a seeded two-experiment corpus and a live cluster.

The corpus is deterministic (hash-based generation, no RNG state), so the
golden response files under tests/golden stay valid across runs and
machines. Session scope keeps the expensive pieces (corpus build, worker
registration) to one setup for the whole run.
"""

from __future__ import annotations

import re
import threading
from datetime import date, timedelta
from pathlib import Path

import pytest

from atmoscope.bench import seed_corpus
from atmoscope.cluster import FrontEnd, Worker

CORPUS_FIRST_DAY = date(2002, 7, 1)
CORPUS_N_DAYS = 20
CORPUS_DAYS = [CORPUS_FIRST_DAY + timedelta(days=i) for i in range(CORPUS_N_DAYS)]

GOLDEN_DIR = Path(__file__).parent / "golden"

# Requests whose byte-normalised responses are frozen under tests/golden.
# (filename, method, path, json body, expected status). The regen script
# replays these against a one-worker cluster; the tests replay them against
# a two-worker cluster, so byte equality doubles as a transparency check.
GOLDEN_REQUESTS = [
    ("experiments.json", "GET", "/api/v1/experiments", None, 200),
    ("days_mipas.json", "GET",
     "/api/v1/experiments/mipas/days?from=2002-07-01&to=2002-07-20", None, 200),
    ("records_2002-07-05.json", "GET",
     "/api/v1/experiments/mipas/records?day=2002-07-05", None, 200),
    ("records_bbox_2002-07-05.json", "GET",
     "/api/v1/experiments/mipas/records?day=2002-07-05&bbox=20,60,-40,40",
     None, 200),
    ("cloudtop_2002-07-05.json", "GET",
     "/api/v1/experiments/mipas/cloudtop?day=2002-07-05&observable=ci"
     "&cmp=le&threshold=1.8", None, 200),
    ("orbit_2002-07-05.json", "GET",
     "/api/v1/experiments/gome/orbit?day=2002-07-05", None, 200),
    ("match_3days.json", "POST", "/api/v1/match",
     {"exp_a": "mipas", "exp_b": "gome", "from": "2002-07-01",
      "to": "2002-07-03", "dt_max_s": 900.0, "dist_max_km": 300.0}, 200),
    ("error_unknown_experiment.json", "GET",
     "/api/v1/experiments/nope/records?day=2002-07-05", None, 404),
    ("error_bad_bbox.json", "GET",
     "/api/v1/experiments/mipas/records?day=2002-07-05&bbox=oops", None, 400),
]

ELAPSED_RE = re.compile(rb'"elapsed_ms":[0-9.eE+-]+')


def normalize_body(body: bytes) -> bytes:
    """Zero out the only nondeterministic byte span in a response."""
    return ELAPSED_RE.sub(b'"elapsed_ms":0', body)


# Verdict lines collected by the acceptance tests; printed as a scorecard
# after the run so they stay visible through pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance scorecard")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """20 days of two synthetic experiments with different seeds and cadences."""
    root = tmp_path_factory.mktemp("corpus")
    seed_corpus(root, "mipas", CORPUS_FIRST_DAY, CORPUS_N_DAYS, seed=0)
    seed_corpus(root, "gome", CORPUS_FIRST_DAY, CORPUS_N_DAYS, seed=1,
                interval_s=78.0)
    return root


class ClusterHarness:
    """A front-end plus n in-process worker threads, torn down as a unit."""

    def __init__(self, catalog_root: Path, n_workers: int,
                 heartbeat_interval_s: float = 0.5):
        self.frontend = FrontEnd(catalog_root,
                                 heartbeat_interval_s=heartbeat_interval_s)
        self.frontend.start()
        self.workers: list[Worker] = []
        self.threads: list[threading.Thread] = []
        for _ in range(n_workers):
            self.add_worker()
        if n_workers and not self.frontend.wait_for_workers(n_workers, 15.0):
            raise RuntimeError("workers did not register in time")

    def add_worker(self, **kwargs) -> Worker:
        w = Worker(self.frontend.catalog.root, self.frontend.address, **kwargs)
        t = threading.Thread(target=w.run, daemon=True)
        t.start()
        self.workers.append(w)
        self.threads.append(t)
        return w

    def stop(self) -> None:
        for w in self.workers:
            w.stop()
        self.frontend.stop()
        for t in self.threads:
            t.join(timeout=5.0)


@pytest.fixture(scope="session")
def cluster(corpus_root: Path) -> ClusterHarness:
    harness = ClusterHarness(corpus_root, n_workers=2)
    yield harness
    harness.stop()
