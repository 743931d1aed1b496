"""Newline-delimited JSON RPC over a Unix stream socket.

Each request line is {"id", "method", "params"}; each response line is
{"id", "result", "error"}. Requests are applied to the orchestrator one at a
time, so handlers never run concurrently.
"""

from __future__ import annotations

import asyncio
import json
import logging
import socket
from typing import Any, Optional

from .sim import Orchestrator

log = logging.getLogger(__name__)


def _error(rid: Any, kind: str, message: str) -> dict[str, Any]:
    return {"id": rid, "result": None, "error": {"type": kind, "message": message}}


def handle_line(orch: Orchestrator, line: bytes) -> dict[str, Any]:
    try:
        request = json.loads(line)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        return _error(None, "ParseError", str(exc))
    if not isinstance(request, dict):
        return _error(None, "ParseError", "request must be a JSON object")
    return orch.handle_request(request)


class RpcServer:
    def __init__(self, orch: Orchestrator, socket_path: str):
        self.orch = orch
        self.socket_path = socket_path
        self._lock = asyncio.Lock()
        self._server: Optional[asyncio.AbstractServer] = None

    async def _client(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while line := await reader.readline():
                if not line.strip():
                    continue
                async with self._lock:
                    response = handle_line(self.orch, line)
                writer.write(json.dumps(response).encode() + b"\n")
                await writer.drain()
        except ConnectionError:
            pass
        finally:
            writer.close()

    async def start(self) -> None:
        self._server = await asyncio.start_unix_server(self._client, path=self.socket_path)
        log.info("rpc listening on %s", self.socket_path)

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()


class RpcClient:
    """Small blocking client, handy for tests and the CLI."""

    def __init__(self, socket_path: str, timeout: float = 5.0):
        self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._sock.settimeout(timeout)
        self._sock.connect(socket_path)
        self._file = self._sock.makefile("rwb")
        self._next_id = 1

    def call(self, method: str, params: Optional[dict[str, Any]] = None) -> dict[str, Any]:
        rid = self._next_id
        self._next_id += 1
        req = {"id": rid, "method": method, "params": params or {}}
        self._file.write(json.dumps(req).encode() + b"\n")
        self._file.flush()
        return json.loads(self._file.readline())

    def close(self) -> None:
        self._file.close()
        self._sock.close()

    def __enter__(self) -> "RpcClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
