"""Query chunking and deterministic chunk-to-worker assignment.

A client query is split into one chunk per non-empty UTC day it touches
(day counts come from the catalog manifest, so cost estimates are exact).
Assignment is longest-processing-time greedy: chunks in descending cost
order go to the worker with the least total assigned cost. Both functions
are pure, so the schedule is reproducible from a registry snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Any, Optional

from ..core import (
    CloudCriteria,
    Comparator,
    QueryWindow,
    ValidationError,
)


class ChunkKind(Enum):
    RECORDS = "RECORDS"
    CLOUDTOP = "CLOUDTOP"
    ORBIT = "ORBIT"


class ClusterError(Exception):
    """Cluster failure with a stable error code."""

    code = "CLUSTER_ERROR"

    def __init__(self, message: str):
        super().__init__(message)


class NoWorkersError(ClusterError):
    code = "NO_WORKERS"


class ChunkRetriesExhaustedError(ClusterError):
    code = "CHUNK_RETRIES_EXHAUSTED"

    def __init__(self, chunk_index: int, worker_history: list[int]):
        super().__init__(
            f"chunk {chunk_index} failed on workers {worker_history}; retries exhausted")
        self.chunk_index = chunk_index
        self.worker_history = worker_history


class WorkerTaskError(ClusterError):
    code = "WORKER_ERROR"


@dataclass(frozen=True)
class TaskChunk:
    """Unit of distributed work: one experiment-day slice of a query."""

    task_id: str
    chunk_index: int
    experiment: str
    window: QueryWindow  # spans at most one UTC day
    kind: ChunkKind
    params: Optional[CloudCriteria]
    cost: int  # manifest record count for the day

    def to_wire(self) -> dict[str, Any]:
        params = None
        if self.params is not None:
            params = {
                "observable": self.params.observable,
                "cmp": self.params.comparator.value,
                "threshold": self.params.threshold,
                "alt_min_km": self.params.alt_min_km,
                "alt_max_km": self.params.alt_max_km,
            }
        return {
            "type": "task",
            "task_id": self.task_id,
            "chunk_index": self.chunk_index,
            "experiment": self.experiment,
            "window": {
                "time_from_ms": self.window.time_from_ms,
                "time_to_ms": self.window.time_to_ms,
                "bbox": list(self.window.bbox) if self.window.bbox else None,
            },
            "kind": self.kind.value,
            "cost": self.cost,
            "params": params,
        }


def chunk_from_wire(doc: dict[str, Any]) -> TaskChunk:
    win = doc["window"]
    bbox = tuple(win["bbox"]) if win.get("bbox") else None
    params = None
    if doc.get("params"):
        p = doc["params"]
        params = CloudCriteria(
            observable=p["observable"],
            comparator=Comparator.parse(p["cmp"]),
            threshold=float(p["threshold"]),
            alt_min_km=float(p["alt_min_km"]),
            alt_max_km=float(p["alt_max_km"]),
        )
    return TaskChunk(
        task_id=doc["task_id"],
        chunk_index=int(doc["chunk_index"]),
        experiment=doc["experiment"],
        window=QueryWindow(time_from_ms=int(win["time_from_ms"]),
                           time_to_ms=int(win["time_to_ms"]), bbox=bbox),
        kind=ChunkKind(doc["kind"]),
        params=params,
        cost=int(doc.get("cost", 0)),
    )


def split_into_chunks(task_id: str, experiment: str, window: QueryWindow,
                      kind: ChunkKind, params: Optional[CloudCriteria],
                      day_counts: list[tuple[date, int]]) -> list[TaskChunk]:
    """One chunk per non-empty UTC day the window touches, in day order.

    Days without a segment (zero manifest count) produce no chunk, so chunk
    indices are dense over the days that will actually be read.
    """
    if kind is ChunkKind.CLOUDTOP and params is None:
        raise ValidationError("CLOUDTOP chunks require cloud criteria")
    counts = dict(day_counts)
    chunks = []
    for day in window.days():
        cost = counts.get(day, 0)
        if cost <= 0:
            continue
        chunks.append(TaskChunk(
            task_id=task_id,
            chunk_index=len(chunks),
            experiment=experiment,
            window=window.clip_to_day(day),
            kind=kind,
            params=params,
            cost=cost,
        ))
    return chunks


def assign(chunks: list[TaskChunk],
           workers: list[tuple[int, str, int]]) -> dict[int, int]:
    """LPT-greedy map of chunk_index -> worker_id; pure and deterministic.

    ``workers`` is a registry snapshot of (worker_id, state_name,
    pending_cost); only READY and BUSY workers are eligible. Loads start at
    each worker's pending cost so chunks of concurrently running tasks spread
    out instead of piling onto the lowest id. Chunks are taken in descending
    cost order (ties: ascending chunk_index) and each goes to the eligible
    worker with the least total cost (ties: lowest worker_id).
    """
    eligible = sorted(
        (wid, pending) for wid, state, pending in workers
        if state in ("READY", "BUSY"))
    if not eligible:
        raise NoWorkersError("no READY or BUSY worker available")
    loads = {wid: pending for wid, pending in eligible}
    order = sorted(loads)
    plan: dict[int, int] = {}
    for chunk in sorted(chunks, key=lambda c: (-c.cost, c.chunk_index)):
        wid = min(order, key=lambda w: (loads[w], w))
        plan[chunk.chunk_index] = wid
        loads[wid] += chunk.cost
    return plan
