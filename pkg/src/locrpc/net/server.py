"""HTTP server hosting the server-side function store."""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .. import anf as A
from ..machine import (
    ArityMismatch,
    ClientRunning,
    ClosedFunction,
    Frame,
    MachineError,
    ServerRunning,
    StoreResolver,
    Strategy,
    Stuck,
    UnknownFunction,
    WrongLocationStore,
    step,
)
from ..syntax import CLIENT
from .wire import CallMsg, DecodeError, ErrorMsg, Message, ReplyMsg, ReqMsg, RetMsg, decode, encode

log = logging.getLogger(__name__)

_HOLE = Frame("_pending", A.Val(A.Var("_pending")))


class UnknownSession(Exception):
    kind = "UnknownSession"


class _ServerSide(StoreResolver):
    """Resolves server functions; client closures are only checked by name."""

    def check(self, fun, nargs, side):
        if side is CLIENT:
            if not isinstance(fun, A.Clo):
                raise Stuck(f"cannot call {A.pretty_value(fun)}")
            if fun.name in self.server:
                raise WrongLocationStore(f"{fun.name} is a server function")
            return
        super().check(fun, nargs, side)


class SessionTable:
    """Server stacks keyed by session id, plus the set of sessions in flight."""

    def __init__(self):
        self.lock = threading.Lock()
        self.stacks: dict[str, tuple[Frame, ...]] = {}
        self.in_flight: set[str] = set()
        self.counter = 0

    def open(self) -> str:
        with self.lock:
            self.counter += 1
            sid = str(self.counter)
            self.stacks[sid] = ()
            self.in_flight.add(sid)
            return sid

    def acquire(self, sid: str) -> tuple[Frame, ...]:
        with self.lock:
            if sid not in self.stacks:
                raise UnknownSession(f"no session {sid}")
            if sid in self.in_flight:
                raise UnknownSession(f"session {sid} already has a request in flight")
            self.in_flight.add(sid)
            return self.stacks[sid]

    def release(self, sid: str, stack: tuple[Frame, ...] | None) -> None:
        """Store the new stack, or drop the session when `stack` is None."""
        with self.lock:
            self.in_flight.discard(sid)
            if stack is None:
                self.stacks.pop(sid, None)
            else:
                self.stacks[sid] = stack

    def __len__(self) -> int:
        with self.lock:
            return len(self.stacks)


class RpcService:
    """Runs server phases: from a request until the next reply or call."""

    def __init__(self, server_store: dict[str, ClosedFunction], strategy: Strategy, fuel: int = 10**6):
        self.resolver = _ServerSide({}, dict(server_store))
        self.strategy = strategy
        self.fuel = fuel
        self.sessions = SessionTable()

    def run_phase(self, term: A.Term, stack: tuple[Frame, ...]):
        conf = ServerRunning(_HOLE, term, stack)
        for _ in range(self.fuel):
            nxt, rule = step(conf, self.strategy, self.resolver)
            if isinstance(nxt, ClientRunning):
                bound = nxt.term.bound
                if rule == "Reply":
                    return ("reply", bound.value, nxt.stack)
                return ("call", bound.fun, bound.args, nxt.stack)
            conf = nxt
        raise Stuck(f"server phase did not finish in {self.fuel} steps")

    def handle(self, msg: Message) -> Message:
        if self.strategy is Strategy.ENC:
            return self._handle_enc(msg)
        return self._handle_state(msg)

    def _handle_enc(self, msg: Message) -> Message:
        match msg:
            case ReqMsg(fun, args, None):
                self.resolver.check(fun, len(args), CLIENT.other)
                out = self.run_phase(A.LocalApp(fun, args), ())
            case ReqMsg():
                raise DecodeError("sessions are not used by a state-encoding server")
            case _:
                raise DecodeError(f"unexpected {type(msg).__name__} for a state-encoding server")
        if out[0] == "reply":
            return ReplyMsg(out[1])
        return CallMsg(out[1], out[2])

    def _handle_state(self, msg: Message) -> Message:
        match msg:
            case ReqMsg(fun, args, sid):
                self.resolver.check(fun, len(args), CLIENT.other)
                if sid is None:
                    sid = self.sessions.open()
                    stack = ()
                else:
                    stack = self.sessions.acquire(sid)
                    if not stack:
                        self.sessions.release(sid, stack)
                        raise UnknownSession(f"session {sid} has no pending server context")
                term = A.Let("r", A.LocalApp(fun, args), A.Val(A.Var("r")))
            case RetMsg(sid, value):
                stack = self.sessions.acquire(sid)
                if not stack:
                    self.sessions.release(sid, stack)
                    raise UnknownSession(f"session {sid} has nothing to return to")
                top, stack = stack[0], stack[1:]
                term = A.Let(top.x, A.Val(value), top.body)
            case _:
                raise DecodeError(f"unexpected {type(msg).__name__} for a stateful server")
        try:
            out = self.run_phase(term, stack)
        except BaseException:
            self.sessions.release(sid, None)
            raise
        if out[0] == "reply":
            value, stack = out[1], out[2]
            self.sessions.release(sid, stack if stack else None)
            return ReplyMsg(value, sid)
        fun, args, stack = out[1], out[2], out[3]
        self.sessions.release(sid, stack)
        return CallMsg(fun, args, sid)


_STATUS = {
    "DecodeError": 400,
    "UnknownFunction": 404,
    "UnknownSession": 409,
}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _HTTPServer

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/debug/sessions" and not self.server.production:
            body = json.dumps({"open": len(self.server.service.sessions)}).encode()
            self._send(200, body)
        else:
            self._send(404, encode(ErrorMsg("NotFound", f"no route {self.path}")))

    def do_POST(self):
        if self.path != "/rpc":
            self._send(404, encode(ErrorMsg("NotFound", f"no route {self.path}")))
            return
        length = int(self.headers.get("Content-Length") or 0)
        data = self.rfile.read(length)
        try:
            reply = self.server.service.handle(decode(data))
            self._send(200, encode(reply))
        except (DecodeError, UnknownFunction, UnknownSession, MachineError, ValueError) as exc:
            kind = getattr(exc, "kind", type(exc).__name__)
            status = _STATUS.get(kind, 500)
            self._send(status, encode(ErrorMsg(kind, str(exc))))


class _HTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, service: RpcService, production: bool):
        super().__init__(addr, _Handler)
        self.service = service
        self.production = production


class RpcServer:
    """A running server; `start` binds and serves on a background thread."""

    def __init__(
        self,
        server_store: dict[str, ClosedFunction],
        strategy: Strategy,
        host: str = "127.0.0.1",
        port: int = 0,
        production: bool = False,
    ):
        self.service = RpcService(server_store, strategy)
        self.host = host
        self.requested_port = port
        self.production = production
        self.httpd: _HTTPServer | None = None
        self.thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        assert self.httpd is not None
        return self.httpd.server_address[1]

    @property
    def endpoint(self) -> str:
        return f"http://{self.host}:{self.port}/rpc"

    def start(self) -> RpcServer:
        self.httpd = _HTTPServer((self.host, self.requested_port), self.service, self.production)
        self.thread = threading.Thread(
            target=self.httpd.serve_forever, kwargs={"poll_interval": 0.05}, name="locrpc-server", daemon=True
        )
        self.thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd = _HTTPServer((self.host, self.requested_port), self.service, self.production)
        try:
            self.httpd.serve_forever()
        finally:
            self.httpd.server_close()

    def stop(self) -> None:
        if self.httpd is not None:
            self.httpd.shutdown()
            self.httpd.server_close()
        if self.thread is not None:
            self.thread.join()
        self.thread = None

    def __enter__(self) -> RpcServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


__all__ = ["RpcServer", "RpcService", "SessionTable", "UnknownSession", "ArityMismatch"]
