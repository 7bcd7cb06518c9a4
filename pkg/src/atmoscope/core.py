"""Shared domain types for geotemporal satellite point data.

Everything in here is immutable after construction and free of I/O: geodesy
on a spherical Earth, UTC day arithmetic, observation records and the
cloud-criteria predicate. All other modules build on these types.

Times are integer milliseconds since the Unix epoch, UTC only. Day
boundaries sit at 00:00:00 UTC and all time intervals are half-open
[from, to) so day-partitioned data never double-counts a record.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from typing import Optional

EARTH_RADIUS_KM = 6371.0

MS_PER_DAY = 86_400_000
_EPOCH_DATE = date(1970, 1, 1)

TOKEN_RE = re.compile(r"^[a-z0-9_]{1,32}$")


class ValidationError(ValueError):
    """A domain value violates its declared invariants."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def normalize_lon(lon_deg: float) -> float:
    """Map any longitude onto [-180, 180). Idempotent."""
    return ((lon_deg + 180.0) % 360.0) - 180.0


@dataclass(frozen=True)
class GeoPoint:
    """A point on the sphere; longitude is normalised at construction."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        _require(_finite(self.lat_deg) and -90.0 <= self.lat_deg <= 90.0,
                 f"latitude out of range: {self.lat_deg!r}")
        _require(_finite(self.lon_deg), f"longitude not finite: {self.lon_deg!r}")
        object.__setattr__(self, "lon_deg", normalize_lon(float(self.lon_deg)))
        object.__setattr__(self, "lat_deg", float(self.lat_deg))


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km on a sphere of radius 6371 km."""
    p1 = math.radians(a.lat_deg)
    p2 = math.radians(b.lat_deg)
    dp = math.radians(b.lat_deg - a.lat_deg)
    dl = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


# --- UTC day arithmetic ---------------------------------------------------

def day_of(epoch_ms: int) -> date:
    """UTC calendar date containing the given instant (proleptic Gregorian)."""
    return _EPOCH_DATE + timedelta(days=epoch_ms // MS_PER_DAY)


def day_start_ms(d: date) -> int:
    return (d - _EPOCH_DATE).days * MS_PER_DAY


def day_bounds(d: date) -> "QueryWindow":
    """Half-open window [00:00 UTC, next 00:00 UTC) covering exactly one day."""
    start = day_start_ms(d)
    return QueryWindow(time_from_ms=start, time_to_ms=start + MS_PER_DAY)


def parse_day(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"bad date {text!r}: {exc}") from None


def format_time_ms(epoch_ms: int) -> str:
    """ISO-8601 UTC with exactly millisecond precision, e.g. 2002-07-15T00:01:05.000Z."""
    days, rem = divmod(epoch_ms, MS_PER_DAY)
    d = _EPOCH_DATE + timedelta(days=days)
    ms = rem % 1000
    s = rem // 1000
    hh, s = divmod(s, 3600)
    mm, ss = divmod(s, 60)
    return f"{d.isoformat()}T{hh:02d}:{mm:02d}:{ss:02d}.{ms:03d}Z"


_TIME_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt ](\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,6}))?"
    r"(?:[Zz]|\+00:00)$"
)


def parse_time_ms(text: str) -> int:
    """Parse ISO-8601 UTC into epoch milliseconds. Only UTC designators accepted."""
    m = _TIME_RE.match(text)
    if m is None:
        raise ValidationError(f"bad UTC timestamp {text!r}")
    y, mo, dy, hh, mm, ss = (int(g) for g in m.groups()[:6])
    frac = m.group(7) or "0"
    ms = int((frac + "000")[:3])
    try:
        d = date(y, mo, dy)
    except ValueError as exc:
        raise ValidationError(f"bad UTC timestamp {text!r}: {exc}") from None
    _require(hh < 24 and mm < 60 and ss < 60, f"bad UTC timestamp {text!r}")
    epoch_ms = day_start_ms(d) + ((hh * 60 + mm) * 60 + ss) * 1000 + ms
    _require(epoch_ms >= 0, f"timestamp before epoch: {text!r}")
    return epoch_ms


# --- Records --------------------------------------------------------------

@dataclass(frozen=True)
class ObservationRecord:
    """One geotemporal measurement document.

    ``profile`` is an optional vertical sounding: (altitude_km, value) pairs,
    strictly ascending in altitude. All stored scalars are finite.
    """

    experiment: str
    record_id: int
    time_ms: int
    lat: float
    lon: float
    orbit: int
    observables: dict[str, float] = field(default_factory=dict)
    profile: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self) -> None:
        _require(TOKEN_RE.match(self.experiment) is not None,
                 f"bad experiment id {self.experiment!r}")
        _require(isinstance(self.record_id, int) and 0 <= self.record_id < 2 ** 64,
                 f"record_id out of range: {self.record_id!r}")
        _require(isinstance(self.time_ms, int) and self.time_ms >= 0,
                 f"time must be non-negative epoch ms: {self.time_ms!r}")
        _require(_finite(self.lat) and -90.0 <= self.lat <= 90.0,
                 f"latitude out of range: {self.lat!r}")
        _require(_finite(self.lon), f"longitude not finite: {self.lon!r}")
        object.__setattr__(self, "lon", normalize_lon(float(self.lon)))
        object.__setattr__(self, "lat", float(self.lat))
        _require(isinstance(self.orbit, int) and self.orbit >= 0,
                 f"orbit must be a non-negative integer: {self.orbit!r}")
        for name, value in self.observables.items():
            _require(TOKEN_RE.match(name) is not None, f"bad observable name {name!r}")
            _require(_finite(value), f"observable {name} not finite: {value!r}")
        if self.profile is not None:
            prof = tuple((float(a), float(v)) for a, v in self.profile)
            prev = -math.inf
            for alt, value in prof:
                _require(_finite(alt) and _finite(value),
                         f"profile level not finite: ({alt!r}, {value!r})")
                _require(alt > prev, "profile altitudes must be strictly ascending")
                prev = alt
            object.__setattr__(self, "profile", prof)

    @property
    def geo(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)

    def sort_key(self) -> tuple[int, int]:
        return (self.time_ms, self.record_id)


# --- Cloud criteria -------------------------------------------------------

class Comparator(Enum):
    LE = "le"
    GE = "ge"

    @classmethod
    def parse(cls, text: str) -> "Comparator":
        try:
            return cls(text.lower())
        except ValueError:
            allowed = ", ".join(c.value for c in cls)
            raise ValidationError(f"bad comparator {text!r}; allowed: {allowed}") from None


@dataclass(frozen=True)
class CloudCriteria:
    """User-supplied predicate that decides which profile levels count as cloudy."""

    observable: str
    comparator: Comparator
    threshold: float
    alt_min_km: float
    alt_max_km: float

    def __post_init__(self) -> None:
        _require(len(self.observable) > 0, "observable name must be non-empty")
        _require(_finite(self.threshold), f"threshold not finite: {self.threshold!r}")
        _require(_finite(self.alt_min_km) and _finite(self.alt_max_km)
                 and self.alt_min_km <= self.alt_max_km,
                 "altitude window must be non-empty")

    def level_matches(self, value: float) -> bool:
        if self.comparator is Comparator.LE:
            return value <= self.threshold
        return value >= self.threshold


def evaluate_cloud(rec: ObservationRecord, crit: CloudCriteria) -> Optional[float]:
    """Cloud-top altitude under the criteria, or None when nothing qualifies.

    Scans the record's profile inside [alt_min_km, alt_max_km] and returns the
    highest altitude whose value satisfies the comparator/threshold. The
    profile is interpreted as the vertical samples of the criteria's
    observable; records without a profile never qualify.
    """
    if rec.profile is None:
        return None
    top: Optional[float] = None
    for alt, value in rec.profile:
        if crit.alt_min_km <= alt <= crit.alt_max_km and crit.level_matches(value):
            top = alt  # profile ascends, so the last hit is the highest
    return top


# --- Query windows --------------------------------------------------------

@dataclass(frozen=True)
class QueryWindow:
    """Half-open time interval plus an optional wrap-aware bounding box.

    ``bbox`` is (lat_min, lat_max, lon_min, lon_max); the longitude range may
    wrap across the antimeridian (lon_min > lon_max means the range passes
    through 180°).
    """

    time_from_ms: int
    time_to_ms: int
    bbox: Optional[tuple[float, float, float, float]] = None

    def __post_init__(self) -> None:
        _require(isinstance(self.time_from_ms, int) and isinstance(self.time_to_ms, int)
                 and 0 <= self.time_from_ms <= self.time_to_ms,
                 "window times must satisfy 0 <= from <= to")
        if self.bbox is not None:
            lat_min, lat_max, lon_min, lon_max = self.bbox
            for v in self.bbox:
                _require(_finite(v), f"bbox value not finite: {v!r}")
            _require(-90.0 <= lat_min <= lat_max <= 90.0,
                     f"bbox latitudes out of order: {self.bbox!r}")
            object.__setattr__(self, "bbox", (float(lat_min), float(lat_max),
                                              normalize_lon(float(lon_min)),
                                              normalize_lon(float(lon_max))))

    def contains_geo(self, lat: float, lon: float) -> bool:
        if self.bbox is None:
            return True
        lat_min, lat_max, lon_min, lon_max = self.bbox
        if not lat_min <= lat <= lat_max:
            return False
        if lon_min <= lon_max:
            return lon_min <= lon <= lon_max
        return lon >= lon_min or lon <= lon_max  # antimeridian wrap

    def contains_time(self, epoch_ms: int) -> bool:
        return self.time_from_ms <= epoch_ms < self.time_to_ms

    def matches(self, rec: ObservationRecord) -> bool:
        return self.contains_time(rec.time_ms) and self.contains_geo(rec.lat, rec.lon)

    def days(self) -> list[date]:
        """All UTC days the window touches, in order. Empty for an empty window."""
        if self.time_from_ms >= self.time_to_ms:
            return []
        first = day_of(self.time_from_ms)
        last = day_of(self.time_to_ms - 1)
        return [first + timedelta(days=i) for i in range((last - first).days + 1)]

    def clip_to_day(self, d: date) -> "QueryWindow":
        start = day_start_ms(d)
        return QueryWindow(
            time_from_ms=max(self.time_from_ms, start),
            time_to_ms=min(self.time_to_ms, start + MS_PER_DAY),
            bbox=self.bbox,
        )


def window_for_days(first: date, last: date,
                    bbox: Optional[tuple[float, float, float, float]] = None) -> QueryWindow:
    """Window covering the inclusive day range [first, last]."""
    _require(first <= last, f"day range out of order: {first} > {last}")
    return QueryWindow(time_from_ms=day_start_ms(first),
                       time_to_ms=day_start_ms(last) + MS_PER_DAY,
                       bbox=bbox)
