"""Newline-delimited JSON message framing over a persistent TCP connection.

One message is one JSON object on one line. Messages are length-bounded at
64 MiB; anything longer is a protocol violation, not a transport limit.
Message types used between front-end and workers: register, registered,
heartbeat, task, result, error, shutdown (field-by-field reference in
docs/protocol.md).
"""

from __future__ import annotations

import json
import socket
import threading
from typing import Any, Optional

MAX_MESSAGE_BYTES = 64 * 1024 * 1024


class ProtocolError(Exception):
    pass


class MessageStream:
    """Thread-safe framed JSON messaging over a connected socket.

    Reads must come from a single thread; writes may come from several
    (sends are serialised by a lock).
    """

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._reader = sock.makefile("rb")
        self._write_lock = threading.Lock()
        self._closed = False

    @property
    def peer(self) -> str:
        try:
            host, port = self._sock.getpeername()[:2]
            return f"{host}:{port}"
        except OSError:
            return "?"

    def send(self, doc: dict[str, Any]) -> None:
        data = json.dumps(doc, separators=(",", ":")).encode("utf-8") + b"\n"
        if len(data) > MAX_MESSAGE_BYTES:
            raise ProtocolError(f"message of {len(data)} bytes exceeds the 64 MiB bound")
        with self._write_lock:
            self._sock.sendall(data)

    def recv(self) -> Optional[dict[str, Any]]:
        """Next message, or None on clean EOF / closed connection."""
        try:
            line = self._reader.readline(MAX_MESSAGE_BYTES + 1)
        except (OSError, ValueError):
            return None
        if not line:
            return None
        if len(line) > MAX_MESSAGE_BYTES:
            raise ProtocolError("incoming message exceeds the 64 MiB bound")
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad message frame: {exc}") from None
        if not isinstance(doc, dict) or not isinstance(doc.get("type"), str):
            raise ProtocolError("message must be an object with a string 'type'")
        return doc

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._reader.close()
        except OSError:
            pass
        self._sock.close()


def connect(host: str, port: int, timeout_s: float = 5.0) -> MessageStream:
    sock = socket.create_connection((host, port), timeout=timeout_s)
    sock.settimeout(None)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return MessageStream(sock)


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bad address {text!r}, expected host:port")
    return host, int(port)
