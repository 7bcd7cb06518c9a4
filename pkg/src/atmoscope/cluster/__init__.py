"""Parallel query tier: front-end scheduler, TCP worker protocol, supervision."""

from .frontend import FrontEnd, TaskOutcome, WorkerSnapshot
from .protocol import MessageStream, ProtocolError, connect, parse_address
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
from .supervisor import WorkerSupervisor
from .worker import Worker, WorkerError, execute_chunk

__all__ = [
    "ChunkKind",
    "ChunkRetriesExhaustedError",
    "ClusterError",
    "FrontEnd",
    "MessageStream",
    "NoWorkersError",
    "ProtocolError",
    "TaskChunk",
    "TaskOutcome",
    "Worker",
    "WorkerError",
    "WorkerSnapshot",
    "WorkerSupervisor",
    "WorkerTaskError",
    "assign",
    "connect",
    "execute_chunk",
    "parse_address",
    "split_into_chunks",
]
