"""Embedded, indexed, append-then-immutable document store.

Records live in per-(experiment, day) segment files under a root directory;
a canonical-JSON manifest lists every segment together with its time span,
a 5-degree grid histogram and a CRC of the compressed payload. Queries prune
on the manifest first, so segments that cannot contain a match are never
opened or decompressed.

Segment file layout: one uncompressed 64-byte ASCII header line
("ATMOSEG1 <experiment> <day> <count>", space-padded), followed by a gzip
stream (magic 0x1F 0x8B) of newline-delimited record JSON sorted by
(time, record_id). Published segments are immutable; replacing a day
rewrites the file and the manifest atomically.

Concurrency: at most one READ_WRITE catalog per root (advisory flock on
<root>/.lock); any number of READ_ONLY catalogs may read concurrently.
A READ_ONLY catalog exposes no mutating operation at all.
"""

from __future__ import annotations

import fcntl
import gzip
import os
import threading
import zlib
from collections import OrderedDict
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

from .core import ObservationRecord, QueryWindow, ValidationError, day_of, parse_day
from .recordio import canonical_dumps, record_from_line, record_to_line

MANIFEST_NAME = "manifest.json"
LOCK_NAME = ".lock"
SEGMENT_MAGIC = "ATMOSEG1"
HEADER_SIZE = 64
MANIFEST_FORMAT = 1

GRID_DEG = 5.0
GRID_LON_CELLS = 72
GRID_LAT_CELLS = 36


class Mode(Enum):
    READ_WRITE = "read_write"
    READ_ONLY = "read_only"


class StoreError(Exception):
    """Base class for catalog/segment failures."""


class CorruptSegmentError(StoreError):
    """Manifest and on-disk segment bytes disagree; message names the files."""


class ConflictError(StoreError):
    """Publish would violate the one-segment-per-day or unique-id rule."""


class ReadOnlyError(StoreError):
    """Mutation attempted through a read-only handle."""


class LockError(StoreError):
    """Another writer already holds the catalog."""


def cell_of(lat: float, lon: float) -> int:
    """5x5 degree grid cell id; lat 90 is folded into the top row."""
    lon_idx = min(int((lon + 180.0) // GRID_DEG), GRID_LON_CELLS - 1)
    lat_idx = min(int((lat + 90.0) // GRID_DEG), GRID_LAT_CELLS - 1)
    return lon_idx * GRID_LAT_CELLS + lat_idx


def bbox_cells(bbox: tuple[float, float, float, float]) -> set[int]:
    """All grid cells that overlap the (wrap-aware) bounding box."""
    lat_min, lat_max, lon_min, lon_max = bbox
    lat_lo = min(int((lat_min + 90.0) // GRID_DEG), GRID_LAT_CELLS - 1)
    lat_hi = min(int((lat_max + 90.0) // GRID_DEG), GRID_LAT_CELLS - 1)
    lon_lo = min(int((lon_min + 180.0) // GRID_DEG), GRID_LON_CELLS - 1)
    lon_hi = min(int((lon_max + 180.0) // GRID_DEG), GRID_LON_CELLS - 1)
    if lon_min <= lon_max:
        lon_range = range(lon_lo, lon_hi + 1)
    else:
        lon_range = [*range(lon_lo, GRID_LON_CELLS), *range(0, lon_hi + 1)]
    return {lon_idx * GRID_LAT_CELLS + lat_idx
            for lon_idx in lon_range
            for lat_idx in range(lat_lo, lat_hi + 1)}


@dataclass(frozen=True)
class Segment:
    """Manifest entry describing one immutable per-(experiment, day) file."""

    experiment: str
    day: date
    path: str  # relative to the catalog root
    record_count: int
    time_min_ms: int
    time_max_ms: int
    grid_histogram: dict[int, int]
    crc32: int
    id_min: int
    id_max: int

    def to_manifest(self) -> dict:
        return {
            "experiment": self.experiment,
            "day": self.day.isoformat(),
            "path": self.path,
            "record_count": self.record_count,
            "time_min_ms": self.time_min_ms,
            "time_max_ms": self.time_max_ms,
            "grid_histogram": {str(k): v for k, v in sorted(self.grid_histogram.items())},
            "crc32": self.crc32,
            "id_min": self.id_min,
            "id_max": self.id_max,
        }

    @classmethod
    def from_manifest(cls, doc: dict) -> "Segment":
        return cls(
            experiment=doc["experiment"],
            day=parse_day(doc["day"]),
            path=doc["path"],
            record_count=int(doc["record_count"]),
            time_min_ms=int(doc["time_min_ms"]),
            time_max_ms=int(doc["time_max_ms"]),
            grid_histogram={int(k): int(v) for k, v in doc["grid_histogram"].items()},
            crc32=int(doc["crc32"]),
            id_min=int(doc["id_min"]),
            id_max=int(doc["id_max"]),
        )


@dataclass(frozen=True)
class ExperimentStats:
    record_count: int
    time_min_ms: Optional[int]
    time_max_ms: Optional[int]
    segment_count: int


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as out:
        out.write(data)
        out.flush()
        os.fsync(out.fileno())
    os.replace(tmp, path)


def _segment_header(experiment: str, day: date, count: int) -> bytes:
    text = f"{SEGMENT_MAGIC} {experiment} {day.isoformat()} {count}"
    if len(text) > HEADER_SIZE - 1:
        raise StoreError(f"segment header too long: {text!r}")
    return (text.ljust(HEADER_SIZE - 1) + "\n").encode("ascii")


def read_segment_file(path: Path) -> tuple[str, date, list[ObservationRecord]]:
    """Decode one segment file. Exposed so tests can open pruned segments."""
    with open(path, "rb") as fh:
        header = fh.read(HEADER_SIZE)
        payload = fh.read()
    fields = header.decode("ascii", errors="replace").split()
    if len(fields) != 4 or fields[0] != SEGMENT_MAGIC:
        raise CorruptSegmentError(f"{path}: bad segment header")
    if not payload.startswith(b"\x1f\x8b"):
        raise CorruptSegmentError(f"{path}: payload is not gzip")
    try:
        lines = gzip.decompress(payload).decode("utf-8").splitlines()
        records = [record_from_line(line) for line in lines if line]
    except (OSError, EOFError, zlib.error, ValidationError) as exc:
        raise CorruptSegmentError(f"{path}: {exc}") from None
    if len(records) != int(fields[3]):
        raise CorruptSegmentError(
            f"{path}: header count {fields[3]} != {len(records)} records")
    return fields[1], parse_day(fields[2]), records


RECORD_CACHE_SEGMENTS = 32


class Catalog:
    """Read-only view of a catalog root. Safe to share across threads."""

    mode = Mode.READ_ONLY

    def __init__(self, root: Path, segments: list[Segment]):
        self._root = root
        self._segments: dict[tuple[str, date], Segment] = {
            (s.experiment, s.day): s for s in segments}
        self.segment_opens = 0  # instrumentation for pruning tests
        # segments are immutable, so parsed records can be cached keyed by
        # content checksum; a replaced day gets a new CRC and a new entry
        self._record_cache: "OrderedDict[tuple[str, int], tuple[ObservationRecord, ...]]" = OrderedDict()
        self._cache_lock = threading.Lock()

    @property
    def root(self) -> Path:
        return self._root

    def close(self) -> None:
        pass

    def __enter__(self) -> "Catalog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- manifest-only reads ----------------------------------------------

    def experiments(self) -> list[str]:
        return sorted({exp for exp, _ in self._segments})

    def segments_for(self, experiment: str) -> list[Segment]:
        return sorted((s for (exp, _), s in self._segments.items() if exp == experiment),
                      key=lambda s: s.day)

    def list_days(self, experiment: str, first: Optional[date] = None,
                  last: Optional[date] = None) -> list[tuple[date, int]]:
        """(day, record_count) pairs from the manifest; no segment is opened."""
        out = []
        for seg in self.segments_for(experiment):
            if first is not None and seg.day < first:
                continue
            if last is not None and seg.day > last:
                continue
            out.append((seg.day, seg.record_count))
        return out

    def stats(self, experiment: str) -> ExperimentStats:
        segs = self.segments_for(experiment)
        if not segs:
            return ExperimentStats(0, None, None, 0)
        return ExperimentStats(
            record_count=sum(s.record_count for s in segs),
            time_min_ms=min(s.time_min_ms for s in segs),
            time_max_ms=max(s.time_max_ms for s in segs),
            segment_count=len(segs),
        )

    # -- queries -----------------------------------------------------------

    def _prunable(self, seg: Segment, window: QueryWindow) -> bool:
        if seg.time_max_ms < window.time_from_ms or seg.time_min_ms >= window.time_to_ms:
            return True
        if window.bbox is not None:
            cells = bbox_cells(window.bbox)
            if not any(seg.grid_histogram.get(c, 0) for c in cells):
                return True
        return False

    def candidate_segments(self, experiment: str, window: QueryWindow) -> list[Segment]:
        return [seg for seg in self.segments_for(experiment)
                if not self._prunable(seg, window)]

    def _segment_records(self, seg: Segment) -> tuple[ObservationRecord, ...]:
        key = (seg.path, seg.crc32)
        with self._cache_lock:
            cached = self._record_cache.get(key)
            if cached is not None:
                self._record_cache.move_to_end(key)
                return cached
        self.segment_opens += 1
        _, _, records = read_segment_file(self._root / seg.path)
        recs = tuple(records)
        with self._cache_lock:
            self._record_cache[key] = recs
            while len(self._record_cache) > RECORD_CACHE_SEGMENTS:
                self._record_cache.popitem(last=False)
        return recs

    def query(self, experiment: str, window: QueryWindow) -> Iterator[ObservationRecord]:
        """Records matching the window, ordered by (time, record_id).

        Unknown experiments yield an empty stream. Day segments are read in
        day order; records inside a segment are already sorted, and day
        partitions are disjoint in time, so the concatenation is ordered.
        """
        for seg in self.candidate_segments(experiment, window):
            for rec in self._segment_records(seg):
                if window.matches(rec):
                    yield rec


class WritableCatalog(Catalog):
    """Single-writer handle; holds the advisory lock until closed."""

    mode = Mode.READ_WRITE

    def __init__(self, root: Path, segments: list[Segment], lock_fd: int):
        super().__init__(root, segments)
        self._lock_fd = lock_fd

    def close(self) -> None:
        if self._lock_fd >= 0:
            os.close(self._lock_fd)
            self._lock_fd = -1

    def _write_manifest(self) -> None:
        doc = {
            "format": MANIFEST_FORMAT,
            "segments": [
                self._segments[key].to_manifest()
                for key in sorted(self._segments, key=lambda k: (k[0], k[1]))
            ],
        }
        _atomic_write(self._root / MANIFEST_NAME,
                      (canonical_dumps(doc) + "\n").encode("utf-8"))

    def _check_unique_ids(self, experiment: str, day: date,
                          ids: list[int]) -> None:
        lo, hi = min(ids), max(ids)
        batch = set(ids)
        for seg in self.segments_for(experiment):
            if seg.day == day:
                continue  # the segment being replaced drops out anyway
            if seg.id_max < lo or seg.id_min > hi:
                continue
            _, _, existing = read_segment_file(self._root / seg.path)
            dup = batch.intersection(r.record_id for r in existing)
            if dup:
                raise ConflictError(
                    f"record ids already present in {seg.path}: "
                    f"{sorted(dup)[:5]}{'...' if len(dup) > 5 else ''}")

    def publish_segment(self, experiment: str, day: date,
                        records: list[ObservationRecord],
                        replace: bool = False) -> Segment:
        """Write one immutable day segment and commit it to the manifest.

        The segment file lands first (temp + rename), the manifest second, so
        a crash between the two leaves the previous manifest fully valid. A
        replace rewrites the same path, so the day is first dropped from the
        manifest; a crash mid-replace then loses that day but never produces
        a manifest whose checksums fail.
        """
        if not records:
            raise ValidationError(
                f"empty segment rejected for {experiment}/{day}: a day with no "
                "data is represented by absence")
        if (experiment, day) in self._segments and not replace:
            raise ConflictError(
                f"segment for ({experiment}, {day}) already exists; pass replace")
        ids = []
        for rec in records:
            if rec.experiment != experiment:
                raise ValidationError(
                    f"record {rec.record_id} belongs to {rec.experiment!r}, "
                    f"not {experiment!r}")
            if day_of(rec.time_ms) != day:
                raise ValidationError(
                    f"record {rec.record_id} at {day_of(rec.time_ms)} does not "
                    f"belong to day {day}")
            ids.append(rec.record_id)
        if len(set(ids)) != len(ids):
            seen: set[int] = set()
            dup = next(i for i in ids if i in seen or seen.add(i))
            raise ConflictError(f"duplicate record_id in batch: {dup}")
        self._check_unique_ids(experiment, day, ids)

        ordered = sorted(records, key=ObservationRecord.sort_key)
        payload = gzip.compress(
            ("\n".join(record_to_line(r) for r in ordered) + "\n").encode("utf-8"),
            compresslevel=6, mtime=0)
        histogram: dict[int, int] = {}
        for rec in ordered:
            cell = cell_of(rec.lat, rec.lon)
            histogram[cell] = histogram.get(cell, 0) + 1

        rel_path = f"segments/{experiment}/{day.isoformat()}.seg"
        seg = Segment(
            experiment=experiment,
            day=day,
            path=rel_path,
            record_count=len(ordered),
            time_min_ms=ordered[0].time_ms,
            time_max_ms=ordered[-1].time_ms,
            grid_histogram=histogram,
            crc32=zlib.crc32(payload),
            id_min=min(ids),
            id_max=max(ids),
        )
        full = self._root / rel_path
        full.parent.mkdir(parents=True, exist_ok=True)
        if (experiment, day) in self._segments:
            del self._segments[(experiment, day)]
            self._write_manifest()  # unreference before overwriting the file
        _atomic_write(full, _segment_header(experiment, day, len(ordered)) + payload)
        self._segments[(experiment, day)] = seg
        self._write_manifest()
        return seg


def _load_manifest(root: Path) -> list[Segment]:
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        return []
    import json

    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
        segments = [Segment.from_manifest(s) for s in doc["segments"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptSegmentError(f"corrupt manifest {manifest_path}: {exc}") from None
    bad = []
    for seg in segments:
        path = root / seg.path
        if not path.exists():
            bad.append(f"{seg.path}: missing")
            continue
        with open(path, "rb") as fh:
            fh.seek(HEADER_SIZE)
            crc = zlib.crc32(fh.read())
        if crc != seg.crc32:
            bad.append(f"{seg.path}: crc mismatch ({crc} != {seg.crc32})")
    if bad:
        raise CorruptSegmentError("checksum validation failed: " + "; ".join(bad))
    return segments


def open_catalog(root: str | Path, mode: Mode = Mode.READ_ONLY) -> Catalog:
    """Open (and for READ_WRITE, create) a catalog root.

    READ_WRITE takes the advisory writer lock; a second concurrent writer
    fails with LockError. READ_ONLY performs no locking and never
    touches the directory.
    """
    root = Path(root)
    if mode is Mode.READ_ONLY:
        if not root.is_dir():
            raise StoreError(f"catalog root does not exist: {root}")
        return Catalog(root, _load_manifest(root))
    root.mkdir(parents=True, exist_ok=True)
    lock_fd = os.open(root / LOCK_NAME, os.O_CREAT | os.O_RDWR, 0o644)
    try:
        fcntl.flock(lock_fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
    except OSError:
        os.close(lock_fd)
        raise LockError(f"another writer holds the catalog at {root}") from None
    try:
        segments = _load_manifest(root)
    except StoreError:
        os.close(lock_fd)
        raise
    return WritableCatalog(root, segments, lock_fd)
