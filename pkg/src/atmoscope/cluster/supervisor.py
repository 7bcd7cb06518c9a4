"""Spawn and supervise local worker processes.

Each slot runs one worker subprocess pointed at the front-end address.
An unexpected exit triggers a restart with exponential backoff (1 s, 2 s,
4 s by default) up to three restarts per slot; after that the slot gives up
and the failure stays visible in ``status()``. Remote workers are not
spawned here; they register themselves over the same wire protocol.
"""

from __future__ import annotations

import subprocess
import sys
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

MAX_RESTARTS = 3


@dataclass
class SlotStatus:
    slot: int
    pid: Optional[int]
    running: bool
    restarts: int
    gave_up: bool


class WorkerSupervisor:
    def __init__(self, count: int, catalog_root: str | Path,
                 frontend: tuple[str, int],
                 backoff_base_s: float = 1.0,
                 max_restarts: int = MAX_RESTARTS,
                 fail_after_chunks: Optional[int] = None):
        if count < 1:
            raise ValueError(f"worker count must be >= 1, got {count}")
        self.count = count
        self.catalog_root = str(catalog_root)
        self.frontend = frontend
        self.backoff_base_s = backoff_base_s
        self.max_restarts = max_restarts
        self.fail_after_chunks = fail_after_chunks
        self._procs: list[Optional[subprocess.Popen]] = [None] * count
        self._restarts = [0] * count
        self._gave_up = [False] * count
        self._stopping = threading.Event()
        self._threads: list[threading.Thread] = []
        self._lock = threading.Lock()

    def _command(self) -> list[str]:
        cmd = [sys.executable, "-m", "atmoscope.cli", "worker",
               "--catalog", self.catalog_root,
               "--frontend", f"{self.frontend[0]}:{self.frontend[1]}"]
        if self.fail_after_chunks is not None:
            cmd += ["--fail-after-chunks", str(self.fail_after_chunks)]
        return cmd

    def _spawn(self, slot: int) -> subprocess.Popen:
        proc = subprocess.Popen(self._command(), stdout=subprocess.DEVNULL,
                                stderr=subprocess.DEVNULL)
        with self._lock:
            self._procs[slot] = proc
        return proc

    def _supervise(self, slot: int) -> None:
        proc = self._spawn(slot)
        while not self._stopping.is_set():
            proc.wait()
            if self._stopping.is_set():
                return
            with self._lock:
                if self._restarts[slot] >= self.max_restarts:
                    self._gave_up[slot] = True
                    return
                self._restarts[slot] += 1
                backoff = self.backoff_base_s * (2 ** (self._restarts[slot] - 1))
            if self._stopping.wait(backoff):
                return
            proc = self._spawn(slot)

    def start(self) -> None:
        for slot in range(self.count):
            t = threading.Thread(target=self._supervise, args=(slot,),
                                 name=f"supervisor-{slot}", daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self, timeout_s: float = 5.0) -> None:
        self._stopping.set()
        with self._lock:
            procs = [p for p in self._procs if p is not None]
        for proc in procs:
            if proc.poll() is None:
                proc.terminate()
        for proc in procs:
            try:
                proc.wait(timeout=timeout_s)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
        for t in self._threads:
            t.join(timeout=timeout_s)

    def pids(self) -> list[Optional[int]]:
        with self._lock:
            return [p.pid if p is not None and p.poll() is None else None
                    for p in self._procs]

    def status(self) -> list[SlotStatus]:
        with self._lock:
            return [SlotStatus(slot=i,
                               pid=p.pid if p is not None else None,
                               running=p is not None and p.poll() is None,
                               restarts=self._restarts[i],
                               gave_up=self._gave_up[i])
                    for i, p in enumerate(self._procs)]
