"""Operator command line: ingest, generate, serve, worker, match, bench.

Exit codes: 0 success, 1 runtime error, 2 usage error or ingest conflict.
All subcommands are thin drivers; behaviour lives in the library modules.
"""

from __future__ import annotations

import signal
import sys
import tempfile
import threading
from collections import defaultdict
from pathlib import Path
from typing import NoReturn, Optional

import click
import uvicorn

from . import bench as bench_mod
from .cluster import FrontEnd, Worker, WorkerError, WorkerSupervisor, parse_address
from .config import ConfigError, get_float, get_int, load_config
from .core import ValidationError, day_of, parse_day, window_for_days
from .ingest import OrbitModel, ParseError, generate_synthetic, parse_delimited, parse_jsonl
from .matcher import MatchParams, match_bruteforce, match_indexed, pairs_to_wire
from .recordio import canonical_dumps
from .rest import create_app
from .store import ConflictError, Mode, StoreError, open_catalog


def _fail(code: int, message: str) -> NoReturn:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _publish_by_day(catalog_root: str, experiment: str, records, replace: bool) -> None:
    by_day = defaultdict(list)
    for rec in records:
        by_day[day_of(rec.time_ms)].append(rec)
    try:
        with open_catalog(catalog_root, Mode.READ_WRITE) as catalog:
            for day in sorted(by_day):
                seg = catalog.publish_segment(experiment, day, by_day[day],
                                              replace=replace)
                click.echo(f"{day.isoformat()}  {seg.record_count}")
    except ConflictError as exc:
        _fail(2, str(exc))
    except (StoreError, ValidationError, OSError) as exc:
        _fail(1, str(exc))
    click.echo(f"total: {sum(len(v) for v in by_day.values())} records "
               f"in {len(by_day)} day(s)")


@click.group()
def cli() -> None:
    """Geotemporal satellite point data: store, cluster, API, matcher."""


@cli.command()
@click.option("--catalog", required=True, type=click.Path(), help="Catalog root directory.")
@click.option("--experiment", required=True, help="Experiment id (lowercase token).")
@click.option("--jsonl", "jsonl_path", type=click.Path(exists=True, dir_okay=False),
              help="Newline-delimited record JSON (optionally gzipped).")
@click.option("--delimited", "delim_path", type=click.Path(exists=True, dir_okay=False),
              help="Semicolon-delimited lines: time;lat;lon;orbit;<observables>.")
@click.option("--schema", help="Comma-separated observable names for --delimited.")
@click.option("--replace", is_flag=True, help="Replace existing day segments.")
def ingest(catalog: str, experiment: str, jsonl_path: Optional[str],
           delim_path: Optional[str], schema: Optional[str], replace: bool) -> None:
    """Parse a record file and publish per-day segments."""
    if (jsonl_path is None) == (delim_path is None):
        raise click.UsageError("exactly one of --jsonl or --delimited is required")
    try:
        if jsonl_path is not None:
            result = parse_jsonl(jsonl_path, experiment)
        else:
            if not schema:
                raise click.UsageError("--delimited requires --schema")
            names = [s.strip() for s in schema.split(",") if s.strip()]
            result = parse_delimited(delim_path, names, experiment)
    except ParseError as exc:
        _fail(1, str(exc))
    except ValidationError as exc:
        _fail(2, str(exc))
    if not result.records:
        click.echo("0 records")
        return
    _publish_by_day(catalog, experiment, result.records, replace)


@cli.command()
@click.option("--catalog", required=True, type=click.Path())
@click.option("--experiment", required=True)
@click.option("--from", "from_day", required=True, help="First day, YYYY-MM-DD.")
@click.option("--to", "to_day", required=True, help="Last day, inclusive.")
@click.option("--seed", required=True, type=int)
@click.option("--interval", default=65.0, show_default=True,
              help="Seconds between successive scans.")
@click.option("--replace", is_flag=True, help="Replace existing day segments.")
def gen(catalog: str, experiment: str, from_day: str, to_day: str,
        seed: int, interval: float, replace: bool) -> None:
    """Generate a deterministic synthetic corpus and publish it."""
    try:
        first, last = parse_day(from_day), parse_day(to_day)
        model = OrbitModel(seed=seed, scan_interval_s=interval)
        per_day = generate_synthetic(model, experiment, first, last)
    except ValidationError as exc:
        _fail(2, str(exc))
    records = [rec for recs in per_day.values() for rec in recs]
    if not records:
        click.echo("0 records")
        return
    _publish_by_day(catalog, experiment, records, replace)


def _require_key(cfg: dict[str, str], key: str, path: str) -> str:
    if key not in cfg:
        _fail(2, f"config {path} is missing required key {key!r}")
    return cfg[key]


@cli.command()
@click.option("--config", "config_path", envvar="ATMOSCOPE_CONFIG", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Config file; defaults to $ATMOSCOPE_CONFIG.")
def serve(config_path: str) -> None:
    """Run the front-end: REST API, scheduler, and local worker spawning.

    Config keys: catalog (required), listen (host:port, default
    127.0.0.1:8080), cluster_listen (default 127.0.0.1:0), workers (local
    worker processes, default 0), static_dir (UI bundle served under /),
    heartbeat_interval_s (default 2).
    """
    try:
        cfg = load_config(config_path)
        catalog_root = _require_key(cfg, "catalog", config_path)
        host, port = parse_address(cfg.get("listen", "127.0.0.1:8080"))
        cluster_listen = parse_address(cfg.get("cluster_listen", "127.0.0.1:0"))
        workers = get_int(cfg, "workers", 0)
        heartbeat = get_float(cfg, "heartbeat_interval_s", 2.0)
        static_dir = cfg.get("static_dir")
    except (ConfigError, ValidationError, ValueError) as exc:
        _fail(2, str(exc))
    if static_dir is not None and not Path(static_dir).is_dir():
        _fail(2, f"static_dir {static_dir!r} is not a directory")
    try:
        frontend = FrontEnd(catalog_root, listen=cluster_listen,
                            heartbeat_interval_s=heartbeat)
    except StoreError as exc:
        _fail(1, str(exc))
    frontend.start()
    supervisor = None
    try:
        if workers > 0:
            supervisor = WorkerSupervisor(workers, catalog_root, frontend.address)
            supervisor.start()
        app = create_app(frontend, static_dir=static_dir)
        fe_host, fe_port = frontend.address
        click.echo(f"cluster listening on {fe_host}:{fe_port} "
                   f"({workers} local worker(s))", err=True)
        click.echo(f"serving http://{host}:{port}", err=True)
        # uvicorn drains connections on SIGTERM, then replays the signal with
        # the pre-serve handler restored; a no-op handler turns that replay
        # into a normal return so the cleanup below always runs and the
        # process exits 0 on a routine stop.
        if threading.current_thread() is threading.main_thread():
            signal.signal(signal.SIGTERM, lambda signum, frame: None)
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        _fail(1, str(exc))
    finally:
        if supervisor is not None:
            supervisor.stop()
        frontend.stop()
        click.echo("shutdown complete", err=True)


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Optional worker config file; flags override it.")
@click.option("--catalog", type=click.Path(), help="Catalog root directory.")
@click.option("--frontend", "frontend_addr", help="Front-end address host:port.")
@click.option("--catalog-mode", default=None,
              help="Must be read_only; anything else refuses to start.")
@click.option("--fail-after-chunks", type=int, default=None, hidden=True,
              help="Fault injection: crash after N completed chunks.")
def worker(config_path: Optional[str], catalog: Optional[str],
           frontend_addr: Optional[str], catalog_mode: Optional[str],
           fail_after_chunks: Optional[int]) -> None:
    """Run a back-end worker that registers with a front-end.

    Config keys: catalog, frontend, catalog_mode (read_only),
    heartbeat_interval_s. The registration reply overrides the heartbeat
    interval.
    """
    cfg: dict[str, str] = {}
    if config_path is not None:
        try:
            cfg = load_config(config_path)
        except ConfigError as exc:
            _fail(2, str(exc))
    catalog = catalog or cfg.get("catalog")
    frontend_addr = frontend_addr or cfg.get("frontend")
    mode = catalog_mode or cfg.get("catalog_mode", "read_only")
    heartbeat = get_float(cfg, "heartbeat_interval_s", 2.0)
    if catalog is None or frontend_addr is None:
        raise click.UsageError("worker needs --catalog and --frontend "
                               "(flags or config keys)")
    try:
        address = parse_address(frontend_addr)
    except ValueError as exc:
        _fail(2, str(exc))
    try:
        w = Worker(catalog, address, heartbeat_interval_s=heartbeat,
                   catalog_mode=mode, fail_after_chunks=fail_after_chunks,
                   exit_on_crash=True)
    except WorkerError as exc:
        _fail(2, str(exc))
    try:
        w.run()
    except (WorkerError, StoreError) as exc:
        _fail(1, str(exc))


@cli.command()
@click.option("--catalog", required=True, type=click.Path())
@click.option("--exp-a", required=True, help="Experiment providing side A.")
@click.option("--exp-b", required=True, help="Experiment providing side B.")
@click.option("--from", "from_day", required=True)
@click.option("--to", "to_day", required=True)
@click.option("--dt", default=900.0, show_default=True, help="Max |time difference| in s.")
@click.option("--dist", default=300.0, show_default=True, help="Max distance in km.")
@click.option("--threads", default=4, show_default=True)
@click.option("--bruteforce", is_flag=True,
              help="Use the exhaustive reference matcher instead of the index.")
def match(catalog: str, exp_a: str, exp_b: str, from_day: str, to_day: str,
          dt: float, dist: float, threads: int, bruteforce: bool) -> None:
    """Match two experiments' records; JSON array on stdout, aligned to A."""
    try:
        window = window_for_days(parse_day(from_day), parse_day(to_day))
        params = MatchParams(dt_max_s=dt, dist_max_km=dist)
    except ValidationError as exc:
        _fail(2, str(exc))
    try:
        with open_catalog(catalog, Mode.READ_ONLY) as cat:
            side_a = list(cat.query(exp_a, window))
            side_b = list(cat.query(exp_b, window))
    except StoreError as exc:
        _fail(1, str(exc))
    if bruteforce:
        pairs = match_bruteforce(side_a, side_b, params)
    else:
        pairs = match_indexed(side_a, side_b, params, threads=threads)
    click.echo(canonical_dumps(pairs_to_wire(pairs)))


@cli.group()
def bench() -> None:
    """Benchmarks; CSV on stdout, summary on stderr."""


@bench.command("serve")
@click.option("--days", default=20, show_default=True, help="Days to request.")
@click.option("--workers", default=1, show_default=True, help="Worker processes.")
@click.option("--repeat", default=3, show_default=True, help="Repeats; median reported.")
@click.option("--catalog", type=click.Path(),
              help="Catalog to benchmark; default generates a temporary corpus.")
@click.option("--experiment", default=bench_mod.BENCH_EXPERIMENT, show_default=True)
@click.option("--seed", default=0, show_default=True)
def bench_serve(days: int, workers: int, repeat: int, catalog: Optional[str],
                experiment: str, seed: int) -> None:
    """End-to-end REST latency per day, normalised to us per point."""
    if days < 1 or workers < 1 or repeat < 1:
        raise click.UsageError("--days, --workers and --repeat must be >= 1")
    tmp: Optional[tempfile.TemporaryDirectory] = None
    if catalog is None:
        tmp = tempfile.TemporaryDirectory(prefix="atmoscope-bench-")
        catalog = tmp.name
    try:
        day_list = bench_mod.seed_corpus(catalog, experiment, n_days=days, seed=seed)
        with bench_mod.ServerStack(catalog, workers=workers) as stack:
            result = bench_mod.measure_serve(stack.base_url, experiment,
                                             day_list, workers, repeats=repeat)
    except (StoreError, ValidationError, RuntimeError, OSError) as exc:
        _fail(1, str(exc))
    finally:
        if tmp is not None:
            tmp.cleanup()
    bench_mod.write_serve_csv(result, sys.stdout)
    click.echo(bench_mod.serve_summary(result), err=True)


@bench.command("match")
@click.option("--size", default=2000, show_default=True, help="Records per side.")
@click.option("--threads", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--dt", default=900.0, show_default=True)
@click.option("--dist", default=300.0, show_default=True)
def bench_match(size: int, threads: int, seed: int, dt: float, dist: float) -> None:
    """Time the reference matcher against the indexed one on random data."""
    if size < 1 or threads < 1:
        raise click.UsageError("--size and --threads must be >= 1")
    try:
        params = MatchParams(dt_max_s=dt, dist_max_km=dist)
    except ValidationError as exc:
        _fail(2, str(exc))
    row = bench_mod.run_match_bench(size, threads, seed=seed, params=params)
    bench_mod.write_match_csv([row], sys.stdout)
    if not row.equal:
        _fail(1, "indexed matcher output differs from the reference")


main = cli

if __name__ == "__main__":
    main()
