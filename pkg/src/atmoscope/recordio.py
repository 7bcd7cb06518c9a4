"""Record <-> JSON wire schema and canonical JSON encoding.

One record schema is used everywhere data crosses a process boundary: the
REST API, jsonl files and the worker protocol all carry objects shaped like

    {"experiment": "mipas", "record_id": 1, "time": "2002-07-15T00:01:05.000Z",
     "lat": 10.5, "lon": -20.25, "orbit": 1234, "observables": {"ci": 2.1},
     "profile": [[6.0, 3.0], [9.0, 1.5]]}

``profile`` is omitted when the record has none. Canonical encoding (sorted
keys, no whitespace) keeps equal values byte-equal, which the golden-file
tests and cluster-transparency checks rely on.
"""

from __future__ import annotations

import json
from typing import Any

from .core import ObservationRecord, ValidationError, format_time_ms, parse_time_ms


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def canonical_dump_bytes(obj: Any) -> bytes:
    return canonical_dumps(obj).encode("utf-8")


def record_to_wire(rec: ObservationRecord) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "experiment": rec.experiment,
        "record_id": rec.record_id,
        "time": format_time_ms(rec.time_ms),
        "lat": rec.lat,
        "lon": rec.lon,
        "orbit": rec.orbit,
        "observables": dict(rec.observables),
    }
    if rec.profile is not None:
        doc["profile"] = [[alt, value] for alt, value in rec.profile]
    return doc


def record_from_wire(doc: Any) -> ObservationRecord:
    """Build a validated record from a parsed JSON object."""
    if not isinstance(doc, dict):
        raise ValidationError(f"record must be a JSON object, got {type(doc).__name__}")
    required = {"experiment", "record_id", "time", "lat", "lon", "orbit", "observables"}
    missing = required - doc.keys()
    if missing:
        raise ValidationError(f"record missing fields: {sorted(missing)}")
    unknown = doc.keys() - required - {"profile"}
    if unknown:
        raise ValidationError(f"record has unknown fields: {sorted(unknown)}")
    if not isinstance(doc["time"], str):
        raise ValidationError("time must be an ISO-8601 string")
    if not isinstance(doc["observables"], dict):
        raise ValidationError("observables must be an object")
    profile = doc.get("profile")
    if profile is not None:
        if (not isinstance(profile, list)
                or any(not isinstance(p, list) or len(p) != 2 for p in profile)):
            raise ValidationError("profile must be a list of [altitude_km, value] pairs")
        profile = tuple((float(a), float(v)) for a, v in profile)
    try:
        record_id = int(doc["record_id"])
        orbit = int(doc["orbit"])
    except (TypeError, ValueError):
        raise ValidationError("record_id and orbit must be integers") from None
    if isinstance(doc["record_id"], float) or isinstance(doc["orbit"], float):
        raise ValidationError("record_id and orbit must be integers")
    return ObservationRecord(
        experiment=doc["experiment"],
        record_id=record_id,
        time_ms=parse_time_ms(doc["time"]),
        lat=float(doc["lat"]),
        lon=float(doc["lon"]),
        orbit=orbit,
        observables={str(k): float(v) for k, v in doc["observables"].items()},
        profile=profile,
    )


def record_to_line(rec: ObservationRecord) -> str:
    return canonical_dumps(record_to_wire(rec))


def record_from_line(line: str) -> ObservationRecord:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad JSON: {exc}") from None
    return record_from_wire(doc)
