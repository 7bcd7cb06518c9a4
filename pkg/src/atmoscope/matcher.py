"""Cross-experiment record matching under space and time tolerances.

For every record of experiment A the matcher finds, independently, the best
counterpart in experiment B: among all B records within both tolerances it
minimises the unit-free score

    score = (dt_s / dt_max_s)**2 + (dist_km / dist_max_km)**2

breaking ties by earlier B time, then smaller B record_id. B records may be
reused across different A records; this is collocation, not one-to-one
assignment.

``match_bruteforce`` is the reference implementation and enumerates every
(a, b) pair. ``match_indexed`` sorts B by time and restricts each A record to
the +-dt_max window via binary search; it must produce exactly the same
output for all inputs and any thread count. Both paths compute the per-pair
residuals with the same float64 element operations, so agreement is exact,
not approximate.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .core import EARTH_RADIUS_KM, ObservationRecord, ValidationError


@dataclass(frozen=True)
class MatchParams:
    dt_max_s: float
    dist_max_km: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.dt_max_s) and self.dt_max_s > 0):
            raise ValidationError(f"dt_max_s must be positive: {self.dt_max_s!r}")
        if not (np.isfinite(self.dist_max_km) and self.dist_max_km > 0):
            raise ValidationError(f"dist_max_km must be positive: {self.dist_max_km!r}")


@dataclass(frozen=True)
class MatchPair:
    a_record_id: int
    b_record_id: int
    dt_s: float
    dist_km: float
    score: float


class _Side:
    """Column view of one record list, shared by both matcher paths."""

    def __init__(self, records: Sequence[ObservationRecord]):
        n = len(records)
        self.ids = np.fromiter((r.record_id for r in records), dtype=np.uint64, count=n)
        self.t_ms = np.fromiter((r.time_ms for r in records), dtype=np.float64, count=n)
        self.lat = np.radians(np.fromiter((r.lat for r in records), dtype=np.float64,
                                          count=n))
        self.lon = np.radians(np.fromiter((r.lon for r in records), dtype=np.float64,
                                          count=n))
        self.cos_lat = np.cos(self.lat)

    def __len__(self) -> int:
        return len(self.ids)


def _distances_km(side: _Side, sel: Any, lat: float, lon: float,
                  cos_lat: float) -> np.ndarray:
    """Haversine from one point to side[sel]; identical element ops everywhere."""
    sp = np.sin((side.lat[sel] - lat) * 0.5)
    sl = np.sin((side.lon[sel] - lon) * 0.5)
    h = sp * sp + cos_lat * side.cos_lat[sel] * sl * sl
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(h, 1.0)))


def _best_for(a_idx: int, A: _Side, B: _Side, sel: Any,
              p: MatchParams) -> Optional[MatchPair]:
    """Best qualifying B record among B[sel] for one A record, or None."""
    dt = np.abs(B.t_ms[sel] - A.t_ms[a_idx]) / 1000.0
    dist = _distances_km(B, sel, A.lat[a_idx], A.lon[a_idx], A.cos_lat[a_idx])
    ok = (dt <= p.dt_max_s) & (dist <= p.dist_max_km)
    if not ok.any():
        return None
    dt, dist = dt[ok], dist[ok]
    score = (dt / p.dt_max_s) ** 2 + (dist / p.dist_max_km) ** 2
    t_ms = B.t_ms[sel][ok]
    ids = B.ids[sel][ok]
    best = score.min()
    ties = np.nonzero(score == best)[0]
    j = min(ties, key=lambda k: (t_ms[k], ids[k]))
    return MatchPair(
        a_record_id=int(A.ids[a_idx]),
        b_record_id=int(ids[j]),
        dt_s=float(dt[j]),
        dist_km=float(dist[j]),
        score=float(score[j]),
    )


def match_bruteforce(a_records: Sequence[ObservationRecord],
                     b_records: Sequence[ObservationRecord],
                     p: MatchParams) -> list[Optional[MatchPair]]:
    """Reference oracle: every A record is scored against every B record."""
    A, B = _Side(a_records), _Side(b_records)
    if len(B) == 0:
        return [None] * len(A)
    everything = slice(None)
    return [_best_for(i, A, B, everything, p) for i in range(len(A))]


def match_indexed(a_records: Sequence[ObservationRecord],
                  b_records: Sequence[ObservationRecord],
                  p: MatchParams, threads: int = 1) -> list[Optional[MatchPair]]:
    """Same contract and exact same output as match_bruteforce.

    B is sorted by (time, record_id) once; each A record only examines the
    +-dt_max_s time window located by binary search. A is partitioned into
    contiguous slices across threads; every slice writes disjoint output
    slots, so results are identical for any thread count.
    """
    if threads < 1:
        raise ValidationError(f"threads must be >= 1: {threads!r}")
    A, B = _Side(a_records), _Side(b_records)
    out: list[Optional[MatchPair]] = [None] * len(A)
    if len(B) == 0 or len(A) == 0:
        return out

    order = np.lexsort((B.ids, B.t_ms))
    B.ids = B.ids[order]
    B.t_ms = B.t_ms[order]
    B.lat = B.lat[order]
    B.lon = B.lon[order]
    B.cos_lat = B.cos_lat[order]
    # widen by 1 ms so float rounding of the bound can never drop a boundary
    # candidate; the exact dt predicate is re-applied inside _best_for
    window_ms = p.dt_max_s * 1000.0 + 1.0

    def run(lo_idx: int, hi_idx: int) -> None:
        for i in range(lo_idx, hi_idx):
            lo = int(np.searchsorted(B.t_ms, A.t_ms[i] - window_ms, side="left"))
            hi = int(np.searchsorted(B.t_ms, A.t_ms[i] + window_ms, side="right"))
            if lo < hi:
                out[i] = _best_for(i, A, B, slice(lo, hi), p)

    if threads == 1:
        run(0, len(A))
        return out
    bounds = np.linspace(0, len(A), threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run, int(bounds[k]), int(bounds[k + 1]))
                   for k in range(threads)]
        for fut in futures:
            fut.result()
    return out


def pairs_to_wire(pairs: Sequence[Optional[MatchPair]]) -> list[Optional[dict]]:
    """JSON shape of a match result: aligned array of null or pair objects."""
    return [
        None if p is None else {
            "a_id": p.a_record_id,
            "b_id": p.b_record_id,
            "dt_s": p.dt_s,
            "dist_km": p.dist_km,
            "score": p.score,
        }
        for p in pairs
    ]
