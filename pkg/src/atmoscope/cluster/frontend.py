"""Front-end tier: worker registry, heartbeat monitoring and task execution.

One FrontEnd owns a TCP listener that workers connect to. All registry and
task state is serialised through a single lock; socket sends happen outside
it so a slow peer can never wedge the state machine. Workers execute one
chunk at a time, so parallelism equals the number of live workers.

Failure handling: a worker is declared DEAD when its connection drops or
when it misses three consecutive heartbeats on the monitor clock. Its
unfinished chunks re-enter scheduling on the remaining live workers, at most
two reassignments per chunk. Chunks are idempotent (workers only read), so a
duplicate completion after a false death is harmless; the first result wins.
"""

from __future__ import annotations

import itertools
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..core import CloudCriteria, QueryWindow
from ..store import Catalog, Mode, open_catalog
from .protocol import MessageStream, ProtocolError
from .scheduler import (
    ChunkKind,
    ChunkRetriesExhaustedError,
    ClusterError,
    NoWorkersError,
    TaskChunk,
    WorkerTaskError,
    assign,
    split_into_chunks,
)

DEFAULT_HEARTBEAT_INTERVAL_S = 2.0
MISSED_HEARTBEATS_TO_DEATH = 3
MAX_REASSIGNMENTS = 2


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


@dataclass
class WorkerSnapshot:
    worker_id: int
    address: str
    state: str
    last_heartbeat_ms: int
    inflight_chunks: int
    completed_chunks: int

    def to_wire(self) -> dict[str, Any]:
        return {
            "worker_id": self.worker_id,
            "address": self.address,
            "state": self.state,
            "last_heartbeat_ms": self.last_heartbeat_ms,
            "inflight_chunks": self.inflight_chunks,
            "completed_chunks": self.completed_chunks,
        }


class _WorkerHandle:
    def __init__(self, worker_id: int, address: str, stream: MessageStream):
        self.worker_id = worker_id
        self.address = address
        self.stream = stream
        self.state = "STARTING"
        self.last_heartbeat_ms = _now_ms()
        self.inflight_chunks = 0
        self.completed_chunks = 0
        # cost of every dispatched-but-unfinished chunk, keyed by
        # (task_id, chunk_index); the sum seeds LPT loads so chunks of
        # concurrent tasks spread across workers
        self.pending_by_chunk: dict[tuple[str, int], int] = {}

    @property
    def pending_cost(self) -> int:
        return sum(self.pending_by_chunk.values())

    def snapshot(self) -> WorkerSnapshot:
        return WorkerSnapshot(self.worker_id, self.address, self.state,
                              self.last_heartbeat_ms, self.inflight_chunks,
                              self.completed_chunks)


@dataclass
class ChunkTiming:
    chunk_index: int
    worker_id: int
    elapsed_ms: float
    n_items: int

    def to_wire(self) -> dict[str, Any]:
        return {"chunk_index": self.chunk_index, "worker_id": self.worker_id,
                "elapsed_ms": self.elapsed_ms, "n_items": self.n_items}


@dataclass
class TaskOutcome:
    """Merged task result; payload items are canonical JSON document texts."""

    payload: list[str]
    chunk_timings: list[ChunkTiming] = field(default_factory=list)


class _TaskRun:
    def __init__(self, task_id: str, chunks: list[TaskChunk], cond: threading.Condition):
        self.task_id = task_id
        self.chunks = {c.chunk_index: c for c in chunks}
        self.assigned: dict[int, int] = {}
        self.attempts: dict[int, list[int]] = {c.chunk_index: [] for c in chunks}
        self.done: dict[int, tuple[list[Any], float, int]] = {}
        self.error: Optional[ClusterError] = None
        self.cond = cond

    @property
    def finished(self) -> bool:
        return self.error is not None or len(self.done) == len(self.chunks)

    def unfinished_on(self, worker_id: int) -> list[int]:
        return sorted(idx for idx, wid in self.assigned.items()
                      if wid == worker_id and idx not in self.done)


class FrontEnd:
    """Spawns nothing itself; workers connect to ``address`` and register."""

    def __init__(self, catalog_root: str | Path,
                 listen: tuple[str, int] = ("127.0.0.1", 0),
                 heartbeat_interval_s: float = DEFAULT_HEARTBEAT_INTERVAL_S,
                 monitor_poll_s: float = 0.25):
        self.catalog: Catalog = open_catalog(catalog_root, Mode.READ_ONLY)
        self.heartbeat_interval_s = heartbeat_interval_s
        self.monitor_poll_s = monitor_poll_s
        self._lock = threading.Lock()
        self._changed = threading.Condition(self._lock)
        self._workers: dict[int, _WorkerHandle] = {}
        self._tasks: dict[str, _TaskRun] = {}
        self._next_worker_id = itertools.count(1)
        self._next_task_number = itertools.count(1)
        self._stopping = False
        self._threads: list[threading.Thread] = []
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind(listen)
        self._listener.listen(64)

    # -- lifecycle ---------------------------------------------------------

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._listener.getsockname()[:2]
        return host, port

    def start(self) -> None:
        for name, target in (("accept", self._accept_loop),
                             ("monitor", self._monitor_loop)):
            t = threading.Thread(target=target, name=f"frontend-{name}", daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        with self._lock:
            self._stopping = True
            streams = [h.stream for h in self._workers.values() if h.state != "DEAD"]
        for stream in streams:
            try:
                stream.send({"type": "shutdown"})
            except OSError:
                pass
        try:
            self._listener.close()
        except OSError:
            pass
        for stream in streams:
            stream.close()
        for t in self._threads:
            t.join(timeout=5.0)
        self.catalog.close()

    # -- registry ----------------------------------------------------------

    def status(self) -> list[WorkerSnapshot]:
        with self._lock:
            return [self._workers[wid].snapshot() for wid in sorted(self._workers)]

    def healthy(self) -> bool:
        with self._lock:
            return any(h.state in ("READY", "BUSY") for h in self._workers.values())

    def wait_for_workers(self, n: int, timeout_s: float = 10.0) -> bool:
        """Block until n workers are READY/BUSY; False on timeout."""
        deadline = time.monotonic() + timeout_s
        with self._changed:
            while True:
                live = sum(1 for h in self._workers.values()
                           if h.state in ("READY", "BUSY"))
                if live >= n:
                    return True
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._changed.wait(remaining)

    def _live_snapshot(self) -> list[tuple[int, str, int]]:
        return [(h.worker_id, h.state, h.pending_cost)
                for h in self._workers.values()]

    # -- connection handling ------------------------------------------------

    def _accept_loop(self) -> None:
        while True:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return  # listener closed
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            t = threading.Thread(target=self._serve_connection,
                                 args=(sock, f"{addr[0]}:{addr[1]}"),
                                 name="frontend-conn", daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_connection(self, sock: socket.socket, address: str) -> None:
        stream = MessageStream(sock)
        try:
            hello = stream.recv()
        except ProtocolError:
            stream.close()
            return
        if hello is None or hello.get("type") != "register":
            stream.close()
            return
        with self._changed:
            if self._stopping:
                stream.close()
                return
            worker_id = next(self._next_worker_id)
            handle = _WorkerHandle(worker_id, address, stream)
            self._workers[worker_id] = handle
            self._changed.notify_all()
        try:
            stream.send({"type": "registered", "worker_id": worker_id,
                         "heartbeat_interval_s": self.heartbeat_interval_s})
        except OSError:
            self._worker_dead(worker_id, "send failed during registration")
            return
        reason = "connection closed"
        while True:
            try:
                msg = stream.recv()
            except ProtocolError as exc:
                reason = str(exc)
                break
            if msg is None:
                break
            kind = msg.get("type")
            if kind == "heartbeat":
                with self._changed:
                    handle.last_heartbeat_ms = _now_ms()
                    if handle.state == "STARTING":
                        handle.state = "READY" if handle.inflight_chunks == 0 else "BUSY"
                        self._changed.notify_all()
            elif kind == "result":
                self._on_result(msg)
            elif kind == "error":
                self._on_chunk_error(msg)
            # anything else: ignore forward-compatibly
        self._worker_dead(worker_id, reason)

    # -- death and reassignment ---------------------------------------------

    def _worker_dead(self, worker_id: int, reason: str) -> None:
        sends: list[tuple[MessageStream, dict]] = []
        with self._changed:
            handle = self._workers.get(worker_id)
            if handle is None or handle.state == "DEAD":
                return
            handle.state = "DEAD"
            handle.inflight_chunks = 0
            handle.pending_by_chunk.clear()
            for task in self._tasks.values():
                lost = task.unfinished_on(worker_id)
                if not lost:
                    continue
                sends.extend(self._reassign_locked(task, lost))
            self._changed.notify_all()
        handle.stream.close()
        self._do_sends(sends)

    def _reassign_locked(self, task: _TaskRun,
                         chunk_indices: list[int]) -> list[tuple[MessageStream, dict]]:
        """Re-schedule lost chunks onto live workers; caller holds the lock."""
        for idx in chunk_indices:
            if len(task.attempts[idx]) > MAX_REASSIGNMENTS:
                task.error = ChunkRetriesExhaustedError(idx, task.attempts[idx])
                task.cond.notify_all()
                return []
        live = self._live_snapshot()
        try:
            plan = assign([task.chunks[idx] for idx in chunk_indices], live)
        except NoWorkersError as exc:
            task.error = exc
            task.cond.notify_all()
            return []
        return self._dispatch_locked(task, plan)

    def _dispatch_locked(self, task: _TaskRun,
                         plan: dict[int, int]) -> list[tuple[MessageStream, dict]]:
        sends = []
        for idx in sorted(plan):
            wid = plan[idx]
            handle = self._workers[wid]
            task.assigned[idx] = wid
            task.attempts[idx].append(wid)
            handle.inflight_chunks += 1
            handle.pending_by_chunk[(task.task_id, idx)] = task.chunks[idx].cost
            if handle.state == "READY":
                handle.state = "BUSY"
            sends.append((handle.stream, task.chunks[idx].to_wire()))
        return sends

    def _do_sends(self, sends: list[tuple[MessageStream, dict]]) -> None:
        for stream, doc in sends:
            try:
                stream.send(doc)
            except OSError:
                pass  # reader thread will notice the dead connection

    def _on_result(self, msg: dict[str, Any]) -> None:
        with self._changed:
            wid = int(msg.get("worker_id", 0))
            key = (str(msg.get("task_id", "")), int(msg.get("chunk_index", -1)))
            handle = self._workers.get(wid)
            if handle is not None and handle.state != "DEAD":
                handle.inflight_chunks = max(0, handle.inflight_chunks - 1)
                handle.completed_chunks += 1
                handle.pending_by_chunk.pop(key, None)
                if handle.inflight_chunks == 0 and handle.state == "BUSY":
                    handle.state = "READY"
            task = self._tasks.get(msg.get("task_id", ""))
            if task is None:
                return
            idx = int(msg["chunk_index"])
            if idx in task.done or idx not in task.chunks:
                return  # duplicate completion after reassignment; first wins
            task.done[idx] = (msg["payload"], float(msg.get("elapsed_ms", 0.0)), wid)
            task.cond.notify_all()

    def _on_chunk_error(self, msg: dict[str, Any]) -> None:
        with self._changed:
            wid = int(msg.get("worker_id", 0))
            key = (str(msg.get("task_id", "")), int(msg.get("chunk_index", -1)))
            handle = self._workers.get(wid)
            if handle is not None and handle.state != "DEAD":
                handle.inflight_chunks = max(0, handle.inflight_chunks - 1)
                handle.pending_by_chunk.pop(key, None)
                if handle.inflight_chunks == 0 and handle.state == "BUSY":
                    handle.state = "READY"
            task = self._tasks.get(msg.get("task_id", ""))
            if task is None or task.finished:
                return
            task.error = WorkerTaskError(
                f"chunk {msg.get('chunk_index')} failed on worker "
                f"{msg.get('worker_id')}: {msg.get('message', 'unknown error')}")
            task.cond.notify_all()

    # -- heartbeat monitor ---------------------------------------------------

    def _monitor_loop(self) -> None:
        limit_ms = MISSED_HEARTBEATS_TO_DEATH * self.heartbeat_interval_s * 1000.0
        while True:
            with self._lock:
                if self._stopping:
                    return
                now = _now_ms()
                overdue = [h.worker_id for h in self._workers.values()
                           if h.state != "DEAD" and now - h.last_heartbeat_ms > limit_ms]
            for wid in overdue:
                self._worker_dead(wid, "missed heartbeats")
            time.sleep(self.monitor_poll_s)

    # -- task execution -----------------------------------------------------

    def run_task(self, experiment: str, window: QueryWindow, kind: ChunkKind,
                 params: Optional[CloudCriteria] = None,
                 timeout_s: float = 120.0) -> TaskOutcome:
        """Split, dispatch, and merge one query; raises ClusterError subclasses.

        The merged payload is ordered by chunk_index, which equals global
        time order, and is byte-identical to a direct single-threaded store
        query regardless of worker count or mid-task failures.
        """
        task_id = f"task-{next(self._next_task_number)}"
        chunks = split_into_chunks(task_id, experiment, window, kind, params,
                                   self.catalog.list_days(experiment))
        if not chunks:
            return TaskOutcome(payload=[])
        task = _TaskRun(task_id, chunks, self._changed)
        with self._changed:
            plan = assign(chunks, self._live_snapshot())  # raises NoWorkersError
            self._tasks[task_id] = task
            sends = self._dispatch_locked(task, plan)
        self._do_sends(sends)
        deadline = time.monotonic() + timeout_s
        try:
            with self._changed:
                while not task.finished:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        raise ClusterError(
                            f"task {task_id} timed out after {timeout_s}s "
                            f"({len(task.done)}/{len(task.chunks)} chunks done)")
                    task.cond.wait(remaining)
                if task.error is not None:
                    raise task.error
        finally:
            with self._lock:
                self._tasks.pop(task_id, None)
        payload: list[str] = []
        timings = []
        for idx in sorted(task.done):
            items, elapsed_ms, wid = task.done[idx]
            payload.extend(items)
            timings.append(ChunkTiming(idx, wid, elapsed_ms, len(items)))
        return TaskOutcome(payload=payload, chunk_timings=timings)
