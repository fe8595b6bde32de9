"""RPC transports: in-process and newline-delimited JSON over local TCP.

Both carry the same envelope shapes::

    request  {"id": int, "method": str, "params": [...]}
    response {"id": int, "method": str, "params": [...], "response": value}
          or {"id": int, "method": str, "params": [...], "error": {"code": str, "message": str}}
"""

from __future__ import annotations

import itertools
import json
import socket
import socketserver
import threading
from typing import TYPE_CHECKING, Any, Mapping, Protocol

from .errors import RpcError
from .types import ChainSpec

if TYPE_CHECKING:
    from .netsim import Simulator

DEFAULT_TIMEOUT_MS = 250
RETRYABLE = frozenset({"NetworkUnreachable", "TransportTimeout"})


class Transport(Protocol):
    def call(self, spec: ChainSpec, method: str, params: list) -> Any: ...


def _unwrap(resp: dict) -> Any:
    if "error" in resp:
        err = resp["error"] or {}
        raise RpcError(err.get("code", "Unknown"), err.get("message", ""))
    return resp.get("response")


class InProcessTransport:
    """Routes envelopes to the simulator by ``spec.id``.

    Requests are serialized to JSON and back so in-process timings still
    include the wire encoding cost.
    """

    def __init__(self, sim: "Simulator", retries: int = 1, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> None:
        self.sim = sim
        self.retries = retries
        self.timeout_ms = timeout_ms
        self._ids = itertools.count(1)

    def call(self, spec: ChainSpec, method: str, params: list) -> Any:
        for attempt in range(self.retries + 1):
            line = json.dumps({"id": next(self._ids), "method": method, "params": params})
            resp = json.loads(self.sim.handle_wire(spec.id, line))
            try:
                return _unwrap(resp)
            except RpcError as exc:
                if exc.code not in RETRYABLE or attempt == self.retries:
                    raise


class TcpTransport:
    """Client side of the TCP gateway; one persistent connection per
    (thread, network)."""

    def __init__(
        self,
        addresses: Mapping[str, tuple[str, int]],
        retries: int = 1,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
    ) -> None:
        self.addresses = dict(addresses)
        self.retries = retries
        self.timeout_s = timeout_ms / 1000
        self._local = threading.local()
        self._ids = itertools.count(1)
        self._all: list = []
        self._all_lock = threading.Lock()

    def _conn(self, network_id: str):
        conns = getattr(self._local, "conns", None)
        if conns is None:
            conns = self._local.conns = {}
        conn = conns.get(network_id)
        if conn is None:
            addr = self.addresses.get(network_id)
            if addr is None:
                raise RpcError("NetworkUnreachable", f"no address for {network_id}")
            sock = socket.create_connection(addr, timeout=self.timeout_s)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = conns[network_id] = (sock, sock.makefile("rb"))
            with self._all_lock:
                self._all.append(conn)
        return conn

    def _drop(self, network_id: str) -> None:
        conn = getattr(self._local, "conns", {}).pop(network_id, None)
        if conn is not None:
            conn[1].close()
            conn[0].close()

    def call(self, spec: ChainSpec, method: str, params: list) -> Any:
        for attempt in range(self.retries + 1):
            envelope = {"id": next(self._ids), "method": method, "params": params}
            try:
                sock, reader = self._conn(spec.id)
                sock.sendall(json.dumps(envelope).encode() + b"\n")
                line = reader.readline()
                if not line:
                    raise ConnectionError("connection closed")
                resp = json.loads(line)
            except socket.timeout:
                self._drop(spec.id)
                if attempt == self.retries:
                    raise RpcError("TransportTimeout", f"{spec.id}: no response")
                continue
            except OSError as exc:
                self._drop(spec.id)
                if attempt == self.retries:
                    raise RpcError("NetworkUnreachable", f"{spec.id}: {exc}") from exc
                continue
            try:
                return _unwrap(resp)
            except RpcError as exc:
                if exc.code not in RETRYABLE or attempt == self.retries:
                    raise

    def close(self) -> None:
        """Close every connection opened by any thread."""
        with self._all_lock:
            conns, self._all = self._all, []
        for sock, reader in conns:
            reader.close()
            sock.close()
        self._local = threading.local()


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class TcpGateway:
    """Expose every simulated network on its own local TCP port."""

    def __init__(self, sim: "Simulator", host: str = "127.0.0.1") -> None:
        self.sim = sim
        self.host = host
        self._servers: dict[str, _Server] = {}
        self._threads: list[threading.Thread] = []

    def start(self) -> dict[str, tuple[str, int]]:
        for network_id in sorted(self.sim.networks):
            self._serve(network_id)
        return self.addresses

    def _serve(self, network_id: str) -> None:
        sim = self.sim

        class Handler(socketserver.StreamRequestHandler):
            def handle(self) -> None:
                for line in self.rfile:
                    if not line.strip():
                        continue
                    out = sim.handle_wire(network_id, line.decode("utf-8", "replace"))
                    self.wfile.write(out.encode() + b"\n")
                    self.wfile.flush()

        server = _Server((self.host, 0), Handler)
        thread = threading.Thread(target=server.serve_forever, name=f"rpc-{network_id}", daemon=True)
        thread.start()
        self._servers[network_id] = server
        self._threads.append(thread)

    @property
    def addresses(self) -> dict[str, tuple[str, int]]:
        return {nid: srv.server_address[:2] for nid, srv in self._servers.items()}

    def close(self) -> None:
        for server in self._servers.values():
            server.shutdown()
            server.server_close()
        self._servers.clear()

    def __enter__(self) -> "TcpGateway":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()
