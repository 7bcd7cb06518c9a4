"""Feed the store: file parsers and a deterministic synthetic data generator.

The generator stands in for real instrument archives, which are institutional
and far too large to ship. It produces a circular-orbit ground track with
Envisat-like parameters, a 16-level cloud-index profile per record and
seed-controlled per-day drop-outs, so downstream benchmarks are reproducible
to the byte. All randomness is hash-based (splitmix-style mixing of seed, day
and record index), never a stateful RNG, so any record can be recomputed
independently.

Parsers accept plain or gzip-compressed input (gzip detected from its two
magic bytes) and validate every line; strict mode aborts on the first bad
line, lenient mode skips and counts.
"""

from __future__ import annotations

import gzip
import io
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import BinaryIO, Iterable, Optional, Union

from .core import (
    MS_PER_DAY,
    ObservationRecord,
    TOKEN_RE,
    ValidationError,
    day_start_ms,
    format_time_ms,
    normalize_lon,
    parse_time_ms,
)
from .recordio import record_from_line, record_to_line

SIDEREAL_DAY_S = 86164.1

PROFILE_ALT_MIN_KM = 6.0
PROFILE_LEVELS = 16  # 1 km spacing, 6..21 km
CLOUD_INDEX_MAX = 6.0
MAX_DROPOUT_FRACTION = 0.3

_MASK64 = (1 << 64) - 1
_SALT_LON0 = 0x10E
_SALT_FRAC = 0xF5AC
_SALT_DROP = 0xD509
_SALT_PROFILE = 0x9F0F


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _mix(*parts: int) -> int:
    h = 0
    for p in parts:
        h = _splitmix64((h ^ (p & _MASK64)))
    return h


def _unit(*parts: int) -> float:
    """Uniform float in [0, 1) from integer inputs; platform-independent."""
    return (_mix(*parts) >> 11) / float(1 << 53)


@dataclass(frozen=True)
class OrbitModel:
    """Circular-orbit ground-track model; defaults are public Envisat values."""

    inclination_deg: float = 98.55
    period_s: float = 6035.0
    scan_interval_s: float = 65.0
    epoch_ms: int = day_start_ms(date(2002, 3, 1))
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.period_s > 0:
            raise ValidationError(f"period_s must be positive: {self.period_s!r}")
        if not 0 < self.scan_interval_s < self.period_s:
            raise ValidationError(
                f"scan_interval_s must lie in (0, period_s): {self.scan_interval_s!r}")
        if self.epoch_ms < 0:
            raise ValidationError("epoch must be non-negative epoch ms")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must fit in 64 bits")


def _ground_track(model: OrbitModel, t_s: float) -> tuple[float, float]:
    inc = math.radians(model.inclination_deg)
    phase = 2.0 * math.pi * t_s / model.period_s
    lat = math.degrees(math.asin(math.sin(inc) * math.sin(phase)))
    lon0 = _unit(model.seed, _SALT_LON0) * 360.0 - 180.0
    lon = (lon0
           + math.degrees(math.atan2(math.cos(inc) * math.sin(phase), math.cos(phase)))
           - 360.0 * t_s / SIDEREAL_DAY_S)
    return lat, normalize_lon(lon)


def generate_day(model: OrbitModel, experiment: str, day: date,
                 dropout: bool = True) -> list[ObservationRecord]:
    """All records for one UTC day; deterministic in (model, experiment, day).

    Drop-out removes a seed-chosen fraction (up to 30%) of the day's records
    without altering the survivors, so day sizes vary realistically.
    """
    if TOKEN_RE.match(experiment) is None:
        raise ValidationError(f"bad experiment id {experiment!r}")
    start_ms = day_start_ms(day)
    if start_ms < model.epoch_ms:
        raise ValidationError(f"cannot generate day {day} before the model epoch")
    day_number = start_ms // MS_PER_DAY
    n = int(86400.0 // model.scan_interval_s)
    drop_fraction = MAX_DROPOUT_FRACTION * _unit(model.seed, day_number, _SALT_FRAC)
    records = []
    for k in range(n):
        if dropout and _unit(model.seed, day_number, k, _SALT_DROP) < drop_fraction:
            continue
        offset_ms = round(k * model.scan_interval_s * 1000.0)
        time_ms = start_ms + offset_ms
        t_s = (time_ms - model.epoch_ms) / 1000.0
        lat, lon = _ground_track(model, t_s)
        profile = tuple(
            (PROFILE_ALT_MIN_KM + level,
             CLOUD_INDEX_MAX * _unit(model.seed, day_number, k, level, _SALT_PROFILE))
            for level in range(PROFILE_LEVELS)
        )
        records.append(ObservationRecord(
            experiment=experiment,
            record_id=day_number * 100_000 + k,
            time_ms=time_ms,
            lat=lat,
            lon=lon,
            orbit=int(t_s // model.period_s),
            observables={"ci": min(v for _, v in profile)},
            profile=profile,
        ))
    return records


def generate_synthetic(model: OrbitModel, experiment: str, first: date, last: date,
                       dropout: bool = True) -> dict[date, list[ObservationRecord]]:
    """Per-day record lists for the inclusive day range [first, last]."""
    if first > last:
        raise ValidationError(f"day range out of order: {first} > {last}")
    out: dict[date, list[ObservationRecord]] = {}
    d = first
    while d <= last:
        out[d] = generate_day(model, experiment, d, dropout=dropout)
        d += timedelta(days=1)
    return out


# --- File I/O -------------------------------------------------------------

Source = Union[str, BinaryIO]


def _open_autodetect(source: Source) -> io.TextIOBase:
    """Text stream over a path or binary stream, transparently gunzipping."""
    raw: BinaryIO
    if isinstance(source, str):
        raw = open(source, "rb")
    else:
        raw = source
    if not raw.seekable():
        raw = io.BytesIO(raw.read())
    magic = raw.read(2)
    raw.seek(0)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.GzipFile(fileobj=raw), encoding="utf-8")
    return io.TextIOWrapper(raw, encoding="utf-8")


@dataclass
class ParseResult:
    records: list[ObservationRecord] = field(default_factory=list)
    skipped: int = 0
    errors: list[str] = field(default_factory=list)


class ParseError(ValueError):
    """A line failed to parse; message carries the 1-based line number."""


def parse_jsonl(source: Source, experiment: str, strict: bool = True) -> ParseResult:
    """Parse newline-delimited record JSON; every line validated independently."""
    result = ParseResult()
    with _open_autodetect(source) as stream:
        for lineno, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = record_from_line(line)
                if rec.experiment != experiment:
                    raise ValidationError(
                        f"experiment {rec.experiment!r} does not match {experiment!r}")
            except ValidationError as exc:
                if strict:
                    raise ParseError(f"line {lineno}: {exc}") from None
                result.skipped += 1
                result.errors.append(f"line {lineno}: {exc}")
                continue
            result.records.append(rec)
    return result


def write_jsonl(records: Iterable[ObservationRecord], path: str) -> int:
    """Write records as newline-delimited JSON; gzips when path ends in .gz."""
    n = 0
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8") as out:
        for rec in records:
            out.write(record_to_line(rec))
            out.write("\n")
            n += 1
    return n


def parse_delimited(source: Source, schema: list[str], experiment: str,
                    strict: bool = True) -> ParseResult:
    """Parse semicolon-delimited text: time;lat;lon;orbit;<observables per schema>.

    ``#`` lines are comments. The format carries no record ids or profiles;
    ids are assigned from the 0-based data-line index.
    """
    if TOKEN_RE.match(experiment) is None:
        raise ValidationError(f"bad experiment id {experiment!r}")
    for name in schema:
        if TOKEN_RE.match(name) is None:
            raise ValidationError(f"bad observable name {name!r} in schema")
    expected = 4 + len(schema)
    result = ParseResult()
    next_id = 0
    with _open_autodetect(source) as stream:
        for lineno, line in enumerate(stream, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(";")
            try:
                if len(parts) != expected:
                    raise ValidationError(
                        f"expected {expected} columns, got {len(parts)}")
                time_ms = parse_time_ms(parts[0])
                try:
                    lat = float(parts[1])
                    lon = float(parts[2])
                    orbit = int(parts[3])
                    values = [float(v) for v in parts[4:]]
                except ValueError as exc:
                    raise ValidationError(f"unparsable number: {exc}") from None
                rec = ObservationRecord(
                    experiment=experiment,
                    record_id=next_id,
                    time_ms=time_ms,
                    lat=lat,
                    lon=lon,
                    orbit=orbit,
                    observables=dict(zip(schema, values)),
                )
            except ValidationError as exc:
                if strict:
                    raise ParseError(f"line {lineno}: {exc}") from None
                result.skipped += 1
                result.errors.append(f"line {lineno}: {exc}")
                continue
            result.records.append(rec)
            next_id += 1
    return result


def write_delimited(records: Iterable[ObservationRecord], schema: list[str],
                    path: str) -> int:
    """Writer counterpart of parse_delimited (scalar columns only, no profile)."""
    n = 0
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8") as out:
        out.write("# time;lat;lon;orbit;" + ";".join(schema) + "\n")
        for rec in records:
            cols = [format_time_ms(rec.time_ms), repr(rec.lat), repr(rec.lon),
                    str(rec.orbit)]
            cols.extend(repr(rec.observables[name]) for name in schema)
            out.write(";".join(cols) + "\n")
            n += 1
    return n
