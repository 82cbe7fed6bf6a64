"""JSON wire messages exchanged between the client driver and the server."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .. import anf as A
from ..cs import StoreFormatError, value_from_json, value_to_json


class DecodeError(ValueError):
    kind = "DecodeError"

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class ReqMsg:
    fun: A.Value
    args: tuple[A.Value, ...]
    session: str | None = None


@dataclass(frozen=True)
class RetMsg:
    session: str
    value: A.Value


@dataclass(frozen=True)
class ReplyMsg:
    value: A.Value
    session: str | None = None


@dataclass(frozen=True)
class CallMsg:
    fun: A.Value
    args: tuple[A.Value, ...]
    session: str | None = None


@dataclass(frozen=True)
class ErrorMsg:
    error: str
    message: str


Message = ReqMsg | RetMsg | ReplyMsg | CallMsg | ErrorMsg


def _wire_value(v: A.Value) -> dict:
    if not isinstance(v, (A.Clo, A.Const)):
        raise ValueError(f"only closed values travel: {A.pretty_value(v)}")
    for node in A.iter_subterms(v):
        if isinstance(node, (A.Var, A.Lam)):
            raise ValueError(f"only closed values travel: {A.pretty_value(v)}")
    return value_to_json(v)


def to_json(msg: Message) -> dict:
    match msg:
        case ReqMsg(fun, args, session):
            doc = {"kind": "req", "fun": _wire_value(fun), "args": [_wire_value(a) for a in args]}
        case RetMsg(session, value):
            doc = {"kind": "ret", "value": _wire_value(value)}
        case ReplyMsg(value, session):
            doc = {"kind": "reply", "value": _wire_value(value)}
        case CallMsg(fun, args, session):
            doc = {"kind": "call", "fun": _wire_value(fun), "args": [_wire_value(a) for a in args]}
        case ErrorMsg(error, message):
            return {"kind": "error", "error": error, "message": message}
        case _:
            raise TypeError(msg)
    if session is not None:
        doc["session"] = session
    return doc


def encode(msg: Message) -> bytes:
    """Canonical bytes: sorted keys, no insignificant whitespace."""
    return json.dumps(to_json(msg), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def _value(doc, end: int) -> A.Value:
    try:
        v = value_from_json(doc)
    except StoreFormatError as exc:
        raise DecodeError(str(exc), end) from None
    for node in A.iter_subterms(v):
        if isinstance(node, A.Var):
            raise DecodeError("variables cannot travel", end)
    return v


def decode(data: bytes) -> Message:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError("body is not UTF-8", exc.start) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError(exc.msg, len(text[: exc.pos].encode())) from None
    end = len(data)
    if not isinstance(doc, dict):
        raise DecodeError("message must be an object", 0)

    def get(key, kind):
        if key not in doc or not isinstance(doc[key], kind):
            raise DecodeError(f"missing or malformed field {key!r}", end)
        return doc[key]

    session = doc.get("session")
    if session is not None and not isinstance(session, str):
        raise DecodeError("session must be a string", end)
    match doc.get("kind"):
        case "req":
            return ReqMsg(_value(get("fun", dict), end), tuple(_value(a, end) for a in get("args", list)), session)
        case "ret":
            if session is None:
                raise DecodeError("ret needs a session", end)
            return RetMsg(session, _value(get("value", dict), end))
        case "reply":
            return ReplyMsg(_value(get("value", dict), end), session)
        case "call":
            return CallMsg(_value(get("fun", dict), end), tuple(_value(a, end) for a in get("args", list)), session)
        case "error":
            return ErrorMsg(get("error", str), get("message", str))
    raise DecodeError(f"unknown message kind {doc.get('kind')!r}", end)
