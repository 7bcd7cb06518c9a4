"""HTTP/JSON face of the system plus static serving of the UI bundle.

Every successful response is an envelope ``{"data": ..., "meta": {"count",
"elapsed_ms", "chunks"}}`` rendered as canonical JSON (sorted keys, no
whitespace) so responses are diffable and golden-testable byte-for-byte.
Errors are ``{"error": {"code", "message"}}`` with the HTTP status matching
the code class. All timestamps are ISO-8601 UTC; the record schema is the
shared wire schema from ``recordio``.

The API is read-only by construction: it holds only a READ_ONLY catalog and
dispatches data work to read-only workers through the cluster front-end.
"""

from __future__ import annotations

import dataclasses
import json
import time
from datetime import date
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from ..cluster import ChunkKind, ClusterError, FrontEnd, NoWorkersError
from ..core import (
    CloudCriteria,
    Comparator,
    ValidationError,
    day_bounds,
    parse_day,
    window_for_days,
)
from ..matcher import MatchParams, match_indexed, pairs_to_wire
from ..recordio import canonical_dump_bytes, record_from_wire

MATCH_CANDIDATE_LIMIT = 10 ** 8
MATCH_THREADS = 4


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _json_response(doc: Any, status: int = 200) -> Response:
    return Response(canonical_dump_bytes(doc), status_code=status,
                    media_type="application/json")


def _error_response(status: int, code: str, message: str) -> Response:
    return _json_response({"error": {"code": code, "message": message}}, status)


def _parse_bbox(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise ApiError(400, "VALIDATION",
                       f"bbox must be latmin,latmax,lonmin,lonmax, got {text!r}")
    try:
        lat_min, lat_max, lon_min, lon_max = (float(p) for p in parts)
    except ValueError:
        raise ApiError(400, "VALIDATION", f"bbox has non-numeric parts: {text!r}") from None
    if not lat_min <= lat_max:
        raise ApiError(400, "VALIDATION", f"bbox latitudes out of order: {text!r}")
    return lat_min, lat_max, lon_min, lon_max


def _parse_day_param(value: Optional[str], name: str = "day") -> date:
    if value is None:
        raise ApiError(400, "VALIDATION", f"missing required parameter {name!r}")
    try:
        return parse_day(value)
    except ValidationError as exc:
        raise ApiError(400, "VALIDATION", str(exc)) from None


def _parse_float_param(value: Optional[str], name: str,
                       default: Optional[float] = None) -> float:
    if value is None:
        if default is None:
            raise ApiError(400, "VALIDATION", f"missing required parameter {name!r}")
        return default
    try:
        return float(value)
    except ValueError:
        raise ApiError(400, "VALIDATION", f"parameter {name!r} must be a number") from None


def create_app(frontend: FrontEnd, static_dir: Optional[str | Path] = None) -> FastAPI:
    app = FastAPI(title="atmoscope", openapi_url=None, docs_url=None, redoc_url=None)
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    catalog = frontend.catalog  # READ_ONLY by FrontEnd construction

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> Response:
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_request: Request, exc: StarletteHTTPException) -> Response:
        code = "NOT_FOUND" if exc.status_code == 404 else "HTTP_ERROR"
        return _error_response(exc.status_code, code, str(exc.detail))

    @app.exception_handler(Exception)
    async def _internal_error(_request: Request, exc: Exception) -> Response:
        return _error_response(500, "INTERNAL", f"{type(exc).__name__}: {exc}")

    def _check_experiment(exp: str) -> None:
        if exp not in catalog.experiments():
            raise ApiError(404, "UNKNOWN_EXPERIMENT", f"unknown experiment {exp!r}")

    def _envelope(data: list[Any], started: float, chunks: int) -> Response:
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return _json_response({
            "data": data,
            "meta": {"count": len(data), "elapsed_ms": elapsed_ms, "chunks": chunks},
        })

    def _envelope_spliced(items: list[str], started: float, chunks: int) -> Response:
        """Envelope around worker-serialised document texts.

        Items are canonical JSON already, so splicing them between canonical
        brackets is byte-identical to serialising the parsed equivalent (the
        golden tests assert exactly that equality).
        """
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        meta = {"count": len(items), "elapsed_ms": elapsed_ms, "chunks": chunks}
        body = (b'{"data":[' + ",".join(items).encode("utf-8") + b'],"meta":'
                + canonical_dump_bytes(meta) + b"}")
        return Response(body, media_type="application/json")

    def _run_day_task(exp: str, day_text: Optional[str], kind: ChunkKind,
                      params: Optional[CloudCriteria],
                      bbox: Optional[str], started: float) -> Response:
        _check_experiment(exp)
        day = _parse_day_param(day_text)
        window = day_bounds(day)
        if bbox is not None:
            window = dataclasses.replace(window, bbox=_parse_bbox(bbox))
        try:
            outcome = frontend.run_task(exp, window, kind, params)
        except NoWorkersError as exc:
            raise ApiError(503, exc.code, str(exc)) from None
        except ClusterError as exc:
            raise ApiError(500, exc.code, str(exc)) from None
        return _envelope_spliced(outcome.payload, started, len(outcome.chunk_timings))

    @app.get("/api/v1/experiments")
    def experiments() -> Response:
        started = time.perf_counter()
        data = []
        for exp in catalog.experiments():
            st = catalog.stats(exp)
            days = catalog.list_days(exp)
            data.append({
                "id": exp,
                "record_count": st.record_count,
                "first_day": days[0][0].isoformat() if days else None,
                "last_day": days[-1][0].isoformat() if days else None,
            })
        return _envelope(data, started, 0)

    @app.get("/api/v1/experiments/{exp}/days")
    def days(exp: str, request: Request) -> Response:
        started = time.perf_counter()
        _check_experiment(exp)
        q = request.query_params
        first = _parse_day_param(q.get("from"), "from")
        last = _parse_day_param(q.get("to"), "to")
        if first > last:
            raise ApiError(400, "VALIDATION", f"from {first} is after to {last}")
        data = [{"day": d.isoformat(), "count": n}
                for d, n in catalog.list_days(exp, first, last)]
        return _envelope(data, started, 0)

    @app.get("/api/v1/experiments/{exp}/records")
    def records(exp: str, request: Request) -> Response:
        started = time.perf_counter()
        q = request.query_params
        return _run_day_task(exp, q.get("day"), ChunkKind.RECORDS, None,
                             q.get("bbox"), started)

    @app.get("/api/v1/experiments/{exp}/cloudtop")
    def cloudtop(exp: str, request: Request) -> Response:
        started = time.perf_counter()
        q = request.query_params
        observable = q.get("observable")
        if not observable:
            raise ApiError(400, "VALIDATION", "missing required parameter 'observable'")
        cmp_text = q.get("cmp")
        if cmp_text is None:
            raise ApiError(400, "VALIDATION", "missing required parameter 'cmp'")
        try:
            comparator = Comparator.parse(cmp_text)
        except ValidationError as exc:
            raise ApiError(400, "VALIDATION", str(exc)) from None
        try:
            crit = CloudCriteria(
                observable=observable,
                comparator=comparator,
                threshold=_parse_float_param(q.get("threshold"), "threshold"),
                alt_min_km=_parse_float_param(q.get("alt_min"), "alt_min", 0.0),
                alt_max_km=_parse_float_param(q.get("alt_max"), "alt_max", 30.0),
            )
        except ValidationError as exc:
            raise ApiError(400, "VALIDATION", str(exc)) from None
        return _run_day_task(exp, q.get("day"), ChunkKind.CLOUDTOP, crit,
                             q.get("bbox"), started)

    @app.get("/api/v1/experiments/{exp}/orbit")
    def orbit(exp: str, request: Request) -> Response:
        started = time.perf_counter()
        return _run_day_task(exp, request.query_params.get("day"), ChunkKind.ORBIT,
                             None, None, started)

    @app.post("/api/v1/match")
    async def match(request: Request) -> Response:
        started = time.perf_counter()
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "VALIDATION", "request body must be JSON") from None
        if not isinstance(body, dict):
            raise ApiError(400, "VALIDATION", "request body must be a JSON object")
        for key in ("exp_a", "exp_b", "from", "to", "dt_max_s", "dist_max_km"):
            if key not in body:
                raise ApiError(400, "VALIDATION", f"missing body field {key!r}")
        exp_a, exp_b = str(body["exp_a"]), str(body["exp_b"])
        _check_experiment(exp_a)
        _check_experiment(exp_b)
        try:
            first = parse_day(str(body["from"]))
            last = parse_day(str(body["to"]))
            if first > last:
                raise ValidationError(f"from {first} is after to {last}")
            params = MatchParams(dt_max_s=float(body["dt_max_s"]),
                                 dist_max_km=float(body["dist_max_km"]))
        except (ValidationError, ValueError) as exc:
            raise ApiError(400, "VALIDATION", str(exc)) from None
        n_a = sum(n for _, n in catalog.list_days(exp_a, first, last))
        n_b = sum(n for _, n in catalog.list_days(exp_b, first, last))
        if n_a * n_b > MATCH_CANDIDATE_LIMIT:
            raise ApiError(400, "TOO_LARGE",
                           f"{n_a} x {n_b} candidate pairs exceed "
                           f"{MATCH_CANDIDATE_LIMIT}; narrow the window")
        window = window_for_days(first, last)
        try:
            out_a = frontend.run_task(exp_a, window, ChunkKind.RECORDS, None)
            out_b = frontend.run_task(exp_b, window, ChunkKind.RECORDS, None)
        except NoWorkersError as exc:
            raise ApiError(503, exc.code, str(exc)) from None
        except ClusterError as exc:
            raise ApiError(500, exc.code, str(exc)) from None
        rec_a = [record_from_wire(json.loads(item)) for item in out_a.payload]
        rec_b = [record_from_wire(json.loads(item)) for item in out_b.payload]
        pairs = match_indexed(rec_a, rec_b, params, threads=MATCH_THREADS)
        chunks = len(out_a.chunk_timings) + len(out_b.chunk_timings)
        return _envelope(pairs_to_wire(pairs), started, chunks)

    @app.get("/api/v1/cluster/status")
    def cluster_status() -> Response:
        started = time.perf_counter()
        data = [snap.to_wire() for snap in frontend.status()]
        return _envelope(data, started, 0)

    @app.get("/healthz")
    def healthz() -> Response:
        ok = frontend.healthy()
        return _json_response({"ok": ok}, status=200 if ok else 503)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="static")

    return app
