"""Back-end worker: registers with a front-end, executes chunks, heartbeats.

Workers open the catalog strictly read-only (least privilege: the serving
tier never mutates the store) and process one chunk at a time. The same
chunk executor also backs direct, cluster-free evaluation so semantics
cannot drift between the two paths.

``fail_after_chunks`` is a fault-injection seam: after completing that many
chunks the worker dies abruptly (socket torn down, no goodbye), which is how
the failover tests simulate a crashed process deterministically.
"""

from __future__ import annotations

import os
import socket
import threading
import time
from pathlib import Path
from typing import Any, Optional

from ..core import evaluate_cloud, format_time_ms
from ..store import Catalog, Mode, open_catalog
from ..recordio import canonical_dumps, record_to_wire
from .protocol import MessageStream, ProtocolError, connect
from .scheduler import ChunkKind, TaskChunk, chunk_from_wire


class WorkerError(Exception):
    pass


def execute_chunk(catalog: Catalog, chunk: TaskChunk) -> list[str]:
    """Evaluate one chunk against the store; payload ordered by (time, id).

    Each payload item is the canonical JSON text of one document. Workers
    serialise once, close to the data; the front-end splices the texts into
    response bodies without re-serialising, so the serialisation cost is
    paid in the parallel tier instead of the single front-end process.
    """
    records = catalog.query(chunk.experiment, chunk.window)
    if chunk.kind is ChunkKind.RECORDS:
        return [canonical_dumps(record_to_wire(rec)) for rec in records]
    if chunk.kind is ChunkKind.CLOUDTOP:
        crit = chunk.params
        out = []
        for rec in records:
            top = evaluate_cloud(rec, crit)
            if top is not None:
                out.append(canonical_dumps({
                    "record_id": rec.record_id,
                    "time": format_time_ms(rec.time_ms),
                    "lat": rec.lat,
                    "lon": rec.lon,
                    "cloud_top_km": top,
                }))
        return out
    # ORBIT: one polyline vertex per record, 1:1 and duplicate-free
    return [canonical_dumps({"time": format_time_ms(rec.time_ms), "lat": rec.lat,
                             "lon": rec.lon, "orbit": rec.orbit})
            for rec in records]


class Worker:
    def __init__(self, catalog_root: str | Path, frontend: tuple[str, int],
                 heartbeat_interval_s: float = 2.0,
                 catalog_mode: str = "read_only",
                 connect_retries: int = 5,
                 connect_retry_delay_s: float = 1.0,
                 fail_after_chunks: Optional[int] = None,
                 exit_on_crash: bool = False):
        if catalog_mode != "read_only":
            raise WorkerError(
                f"workers may only open the catalog read-only, got {catalog_mode!r}")
        self.catalog_root = Path(catalog_root)
        self.frontend = frontend
        self.heartbeat_interval_s = heartbeat_interval_s
        self.connect_retries = connect_retries
        self.connect_retry_delay_s = connect_retry_delay_s
        self.fail_after_chunks = fail_after_chunks
        self.exit_on_crash = exit_on_crash
        self.worker_id: Optional[int] = None
        self._completed = 0
        self._catalog: Optional[Catalog] = None
        self._stream: Optional[MessageStream] = None
        self._stop = threading.Event()

    def _connect(self) -> MessageStream:
        last: Optional[Exception] = None
        for attempt in range(self.connect_retries):
            if attempt:
                time.sleep(self.connect_retry_delay_s)
            try:
                return connect(*self.frontend)
            except OSError as exc:
                last = exc
        raise WorkerError(
            f"cannot reach front-end {self.frontend[0]}:{self.frontend[1]} "
            f"after {self.connect_retries} attempts: {last}")

    def _heartbeat_loop(self, stream: MessageStream) -> None:
        while not self._stop.wait(self.heartbeat_interval_s):
            try:
                stream.send({"type": "heartbeat", "worker_id": self.worker_id})
            except OSError:
                return

    def _crash(self) -> None:
        # abrupt death: RST the socket so the front-end sees a broken peer
        if self._stream is not None:
            try:
                self._stream._sock.setsockopt(
                    socket.SOL_SOCKET, socket.SO_LINGER,
                    b"\x01\x00\x00\x00\x00\x00\x00\x00")
            except OSError:
                pass
            self._stream.close()
        if self.exit_on_crash:
            os._exit(3)
        self._stop.set()

    def stop(self) -> None:
        self._stop.set()
        if self._stream is not None:
            self._stream.close()

    def run(self) -> None:
        """Open the catalog, register, then serve chunks until shutdown."""
        self._catalog = open_catalog(self.catalog_root, Mode.READ_ONLY)
        stream = self._connect()
        self._stream = stream
        try:
            stream.send({"type": "register", "pid": os.getpid(),
                         "host": socket.gethostname()})
            reply = stream.recv()
            if reply is None or reply.get("type") != "registered":
                raise WorkerError(f"unexpected registration reply: {reply!r}")
            self.worker_id = int(reply["worker_id"])
            interval = reply.get("heartbeat_interval_s")
            if interval:
                self.heartbeat_interval_s = float(interval)
            stream.send({"type": "heartbeat", "worker_id": self.worker_id})
            hb = threading.Thread(target=self._heartbeat_loop, args=(stream,),
                                  name="worker-heartbeat", daemon=True)
            hb.start()
            while not self._stop.is_set():
                try:
                    msg = stream.recv()
                except ProtocolError:
                    break
                if msg is None or msg.get("type") == "shutdown":
                    break
                if msg.get("type") != "task":
                    continue
                self._handle_task(stream, msg)
                if (self.fail_after_chunks is not None
                        and self._completed >= self.fail_after_chunks):
                    self._crash()
                    return
        finally:
            self._stop.set()
            stream.close()
            if self._catalog is not None:
                self._catalog.close()

    def _handle_task(self, stream: MessageStream, msg: dict[str, Any]) -> None:
        chunk = chunk_from_wire(msg)
        started = time.perf_counter()
        try:
            payload = execute_chunk(self._catalog, chunk)
        except Exception as exc:  # noqa: BLE001 - reported to the front-end
            try:
                stream.send({"type": "error", "task_id": chunk.task_id,
                             "chunk_index": chunk.chunk_index,
                             "worker_id": self.worker_id,
                             "code": "CHUNK_FAILED", "message": str(exc)})
            except OSError:
                pass
            return
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        try:
            stream.send({"type": "result", "task_id": chunk.task_id,
                         "chunk_index": chunk.chunk_index,
                         "worker_id": self.worker_id,
                         "elapsed_ms": elapsed_ms, "payload": payload})
            self._completed += 1
        except OSError:
            pass
