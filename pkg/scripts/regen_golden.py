#!/usr/bin/env python3
"""Regenerate the frozen REST responses under tests/golden.

Builds the same deterministic corpus the test suite uses, serves it through
a one-worker cluster, replays the request list from tests/conftest.py and
writes each normalised response body. The test suite replays the same
requests against a two-worker cluster, so any drift in wire formats, record
generation or envelope layout shows up as a byte diff.

Run from the repository root:

    python3 scripts/regen_golden.py
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from fastapi.testclient import TestClient

from conftest import (
    CORPUS_FIRST_DAY,
    CORPUS_N_DAYS,
    GOLDEN_DIR,
    GOLDEN_REQUESTS,
    ClusterHarness,
    normalize_body,
)
from atmoscope.bench import seed_corpus
from atmoscope.rest import create_app


def main() -> int:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="atmoscope-golden-") as tmp:
        root = Path(tmp) / "corpus"
        seed_corpus(root, "mipas", CORPUS_FIRST_DAY, CORPUS_N_DAYS, seed=0)
        seed_corpus(root, "gome", CORPUS_FIRST_DAY, CORPUS_N_DAYS, seed=1,
                    interval_s=78.0)
        harness = ClusterHarness(root, n_workers=1)
        try:
            client = TestClient(create_app(harness.frontend))
            for name, method, path, body, expected_status in GOLDEN_REQUESTS:
                if method == "GET":
                    resp = client.get(path)
                else:
                    resp = client.post(path, json=body)
                if resp.status_code != expected_status:
                    print(f"FAIL {name}: status {resp.status_code}, "
                          f"expected {expected_status}", file=sys.stderr)
                    return 1
                out = GOLDEN_DIR / name
                out.write_bytes(normalize_body(resp.content))
                print(f"wrote {out.relative_to(GOLDEN_DIR.parent.parent)} "
                      f"({out.stat().st_size} bytes)")
        finally:
            harness.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
