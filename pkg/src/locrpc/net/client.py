"""Trampolined client driver: runs main locally and talks to the server over HTTP."""

from __future__ import annotations

import http.client
import urllib.parse
from dataclasses import dataclass, field
from typing import Callable

from .. import anf as A
from ..cs import SessionEvent
from ..machine import ClientRunning, FuelExhausted, FunctionStore, StoreResolver, Strategy, step
from .wire import CallMsg, DecodeError, ErrorMsg, Message, ReplyMsg, ReqMsg, RetMsg, decode, encode


class ClientError(Exception):
    kind = "ClientError"


class Transport(ClientError):
    kind = "Transport"


class ServerError(ClientError):
    kind = "ServerError"

    def __init__(self, status: int, error: str, message: str):
        super().__init__(f"server answered {status} {error}: {message}")
        self.status = status
        self.error = error


class UnknownSession(ServerError):
    kind = "UnknownSession"


@dataclass(frozen=True)
class LogEntry:
    direction: str  # "send" | "recv"
    body: bytes

    @property
    def message(self) -> Message:
        return decode(self.body)


@dataclass
class MessageLog:
    entries: list[LogEntry] = field(default_factory=list)

    @property
    def requests(self) -> list[Message]:
        return [e.message for e in self.entries if e.direction == "send"]

    @property
    def responses(self) -> list[Message]:
        return [e.message for e in self.entries if e.direction == "recv"]

    @property
    def round_trips(self) -> int:
        return sum(1 for e in self.entries if e.direction == "send")

    def __len__(self) -> int:
        return len(self.entries)


def _post(endpoint: str, body: bytes, timeout: float) -> tuple[int, bytes]:
    url = urllib.parse.urlsplit(endpoint)
    if url.scheme != "http" or not url.hostname:
        raise Transport(f"unsupported endpoint {endpoint!r}")
    conn = http.client.HTTPConnection(url.hostname, url.port or 80, timeout=timeout)
    try:
        conn.request("POST", url.path or "/rpc", body, {"Content-Type": "application/json"})
        resp = conn.getresponse()
        return resp.status, resp.read()
    except (OSError, http.client.HTTPException) as exc:
        raise Transport(f"cannot reach {endpoint}: {exc}") from None
    finally:
        conn.close()


def client_run(
    store: FunctionStore,
    strategy: Strategy | None = None,
    endpoint: str = "http://127.0.0.1:7070/rpc",
    fuel: int = 10**6,
    between: Callable[[int], None] | None = None,
    timeout: float = 30.0,
) -> tuple[A.Value, MessageLog]:
    """Evaluate main on the client, sending req/ret to the server and looping on its answers.

    `between(n)` runs after the n-th response and before the next message.
    """
    strategy = strategy or store.strategy
    resolver = StoreResolver(store.client, {})
    log = MessageLog()
    term = store.main
    sid: str | None = None
    depth = 0  # frames the server holds for us (state strategy)
    steps = 0
    while not isinstance(term, A.Val):
        steps += 1
        if steps > fuel:
            raise FuelExhausted(f"no value after {fuel} steps")
        match term:
            case A.Let(x, A.Req(fun, args), body):
                msg = ReqMsg(fun, args, sid if strategy is Strategy.STATE and depth else None)
            case A.Let(x, A.Ret(value), body) if strategy is Strategy.STATE:
                if depth == 0 or sid is None:
                    raise ClientError("ret without a pending server call")
                msg = RetMsg(sid, value)
                depth -= 1
            case _:
                nxt, _ = step(ClientRunning(term), strategy, _LocalOnly(resolver))
                term = nxt.term
                continue
        reply = _exchange(endpoint, msg, log, timeout)
        match reply:
            case ReplyMsg(value, rsid):
                term = A.Let(x, A.Val(value), body)
                if strategy is Strategy.STATE:
                    sid = rsid if depth else None
            case CallMsg(fun, args, rsid):
                term = A.Let(x, A.LocalApp(fun, args), body)
                if strategy is Strategy.STATE:
                    depth += 1
                    sid = rsid
            case _:
                raise DecodeError(f"unexpected response {type(reply).__name__}")
        if between is not None:
            between(log.round_trips)
    if depth:
        raise ClientError("finished with server frames still pending")
    return term.value, log


class _LocalOnly:
    """Client-side resolver that refuses to perform remote transitions itself."""

    def __init__(self, inner: StoreResolver):
        self.inner = inner

    def check(self, fun, nargs, side):
        raise ClientError("remote transition reached the local stepper")

    def enter(self, fun, args, side):
        return self.inner.enter(fun, args, side)


def _exchange(endpoint: str, msg: Message, log: MessageLog, timeout: float) -> Message:
    body = encode(msg)
    log.entries.append(LogEntry("send", body))
    status, data = _post(endpoint, body, timeout)
    log.entries.append(LogEntry("recv", data))
    if status != 200:
        try:
            err = decode(data)
        except DecodeError:
            err = ErrorMsg("HTTP", data.decode("utf-8", "replace"))
        if not isinstance(err, ErrorMsg):
            err = ErrorMsg("HTTP", "unexpected body")
        cls = UnknownSession if status == 409 else ServerError
        raise cls(status, err.error, err.message)
    return decode(data)


def session_events(log: MessageLog, strategy: Strategy) -> list[SessionEvent]:
    """Session annotations implied by a message log, with ids numbered 1, 2, ... in order of creation."""
    events: list[SessionEvent] = []
    depth = 0
    current = 0
    created = 0
    msgs = [(e.direction, e.message) for e in log.entries]
    for direction, msg in msgs:
        match direction, msg:
            case "send", ReqMsg():
                if strategy is Strategy.ENC or depth == 0:
                    created += 1
                    current = created
                    events.append(SessionEvent("Created", current))
                else:
                    events.append(SessionEvent("Maintained", current))
            case "send", RetMsg():
                depth -= 1
                events.append(SessionEvent("Maintained", current))
            case "recv", CallMsg():
                if strategy is Strategy.ENC:
                    events.append(SessionEvent("Closed", current))
                else:
                    depth += 1
                    events.append(SessionEvent("Maintained", current))
            case "recv", ReplyMsg():
                kind = "Closed" if strategy is Strategy.ENC or depth == 0 else "Maintained"
                events.append(SessionEvent(kind, current))
    return events


def normalize_sids(events: list[SessionEvent]) -> list[tuple[str, int]]:
    seen: dict[int, int] = {}
    return [(e.kind, seen.setdefault(e.sid, len(seen) + 1)) for e in events]
